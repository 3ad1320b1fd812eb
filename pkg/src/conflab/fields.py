"""Scalar fields on spaces, convexity along geodesics, discrete (log-)subharmonicity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.spatial import cKDTree

from .mesh import Triangulation
from .metric import LengthSpace, SpaceError, geodesic
from .models import oracle_distance

RULE_KINDS = (
    "constant", "affine", "norm-squared", "distance-to-point", "distance-to-set",
    "power-radial", "exp", "product",
)

DistanceFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class Rule:
    """Closed-form field recipe, JSON-shaped: ``{"kind": ..., **params}``.

    Every kind accepts ``scale`` (default 1), multiplying the value.
    ``distance-to-point`` takes ``point`` (chart coordinates) or ``vertex``
    and an optional ``power``; ``distance-to-set`` takes ``points`` or
    ``vertices``; ``exp`` wraps ``of``; ``product`` multiplies ``factors``.
    """

    kind: str
    params: tuple = ()

    @classmethod
    def make(cls, kind: str, **params) -> "Rule":
        return cls.from_json({"kind": kind, **params})

    @classmethod
    def from_json(cls, data: dict[str, Any] | "Rule") -> "Rule":
        if isinstance(data, Rule):
            return data
        if "kind" not in data:
            raise FieldError("field rule needs a 'kind'")
        kind = data["kind"]
        if kind not in RULE_KINDS:
            raise FieldError(f"unknown field rule kind {kind!r}")
        params = {k: v for k, v in data.items() if k != "kind"}
        if kind == "exp":
            params["of"] = cls.from_json(params["of"])
        if kind == "product":
            params["factors"] = tuple(cls.from_json(f) for f in params["factors"])
        if kind == "distance-to-set":
            if not params.get("points") and not params.get("vertices"):
                raise FieldError("distance-to-set with an empty set")
        if kind == "distance-to-point" and "point" not in params and "vertex" not in params:
            raise FieldError("distance-to-point needs 'point' or 'vertex'")
        frozen = tuple(sorted((k, _freeze(v)) for k, v in params.items()))
        return cls(kind, frozen)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        for k, v in self.params:
            if isinstance(v, Rule):
                out[k] = v.to_json()
            elif isinstance(v, tuple) and v and isinstance(v[0], Rule):
                out[k] = [f.to_json() for f in v]
            else:
                out[k] = _thaw(v)
        return out

    def get(self, key: str, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    @property
    def scale(self) -> float:
        return float(self.get("scale", 1.0))

    def needs_coords(self) -> bool:
        if self.kind in ("affine", "norm-squared", "power-radial"):
            return True
        if self.kind == "distance-to-point":
            return self.get("point") is not None
        if self.kind == "distance-to-set":
            return self.get("points") is not None
        if self.kind == "exp":
            return self.get("of").needs_coords()
        if self.kind == "product":
            return any(f.needs_coords() for f in self.get("factors"))
        return False

    def __mul__(self, other: "Rule") -> "Rule":
        return Rule.make("product", factors=[self, other])


def _freeze(v):
    if isinstance(v, list):
        return tuple(_freeze(x) for x in v)
    return v


def _thaw(v):
    if isinstance(v, tuple):
        return [_thaw(x) for x in v]
    return v


def evaluate(rule: Rule, pts: np.ndarray, dist: DistanceFn | None = None,
             vertex_point: Callable[[int], np.ndarray] | None = None) -> np.ndarray:
    """Evaluate ``rule`` at chart points ``pts`` (n, 2).

    ``dist(P, q)`` is the metric used by distance rules; ``vertex_point``
    resolves ``vertex`` parameters to chart points.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    k = rule.kind
    if k == "constant":
        base = np.full(len(pts), float(rule.get("c", rule.get("value", 0.0))))
    elif k == "affine":
        base = float(rule.get("a", 0.0)) * pts[:, 0] + float(rule.get("b", 0.0)) * pts[:, 1] + float(rule.get("c", 0.0))
    elif k == "norm-squared":
        base = pts[:, 0] ** 2 + pts[:, 1] ** 2
    elif k == "power-radial":
        alpha = float(rule.get("alpha"))
        r = np.hypot(pts[:, 0], pts[:, 1])
        with np.errstate(divide="ignore"):
            base = r ** alpha
    elif k in ("distance-to-point", "distance-to-set"):
        if dist is None:
            raise FieldError(f"{k} needs a metric")
        centers = _centers(rule, vertex_point)
        base = np.min(np.stack([dist(pts, c) for c in centers]), axis=0)
        if k == "distance-to-point":
            base = base ** float(rule.get("power", 1.0))
    elif k == "exp":
        inner = evaluate(rule.get("of"), pts, dist, vertex_point)
        if np.any(np.abs(inner) > 700):
            raise FieldError("exponent exceeds 700 in magnitude; e^f would overflow")
        base = np.exp(inner)
    elif k == "product":
        base = np.ones(len(pts))
        for f in rule.get("factors"):
            base = base * evaluate(f, pts, dist, vertex_point)
    else:  # pragma: no cover
        raise FieldError(k)
    scale = rule.scale
    return base if scale == 1.0 else scale * base


def _centers(rule: Rule, vertex_point) -> list[np.ndarray]:
    if rule.kind == "distance-to-point":
        if rule.get("point") is not None:
            return [np.asarray(rule.get("point"), dtype=float)]
        vs = [rule.get("vertex")]
    else:
        if rule.get("points") is not None:
            return [np.asarray(p, dtype=float) for p in rule.get("points")]
        vs = list(rule.get("vertices"))
    if vertex_point is None:
        raise FieldError("vertex-based rule needs a space")
    return [vertex_point(int(v)) for v in vs]


@dataclass
class ScalarField:
    """Values per vertex, optionally restricted to ``support`` vertices."""

    values: np.ndarray
    rule: Rule | None = None
    positive: bool = False
    support: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise FieldError("field values must be finite")
        if self.positive and np.any(self.values <= 0):
            raise FieldError("positivity flag set but some values are <= 0")

    def __len__(self):
        return len(self.values)

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


# ---------------------------------------------------------------------------
# evaluation on spaces


def space_metric(space: LengthSpace) -> tuple[DistanceFn | None, Callable[[int], np.ndarray] | None]:
    if space.oracle is not None and space.coords is not None:
        oracle = space.oracle
        return (lambda P, q: oracle_distance(oracle, P, q)), (lambda v: space.coords[v])
    return None, None


def make_field(space: LengthSpace, rule: Rule | dict) -> ScalarField:
    """Evaluate ``rule`` on every vertex of ``space``."""
    rule = Rule.from_json(rule)
    if rule.needs_coords() and space.coords is None:
        raise FieldError(f"rule {rule.kind!r} needs vertex coordinates")
    values = _evaluate_on_space(rule, space)
    return ScalarField(values, rule, positive=bool(np.all(values > 0)))


def _evaluate_on_space(rule: Rule, space: LengthSpace) -> np.ndarray:
    dist, vpoint = space_metric(space)
    if dist is not None:
        return evaluate(rule, space.coords, dist, vpoint)
    # graph metric: distance rules read shortest-path rows
    if rule.kind in ("distance-to-point", "distance-to-set"):
        if rule.kind == "distance-to-point":
            vs = [rule.get("vertex")]
        else:
            vs = list(rule.get("vertices") or [])
        if any(v is None for v in vs) or not vs:
            raise FieldError("without an oracle, distance rules must name vertices")
        base = np.min(np.stack([space.row(int(v)) for v in vs]), axis=0)
        if rule.kind == "distance-to-point":
            base = base ** float(rule.get("power", 1.0))
        return rule.scale * base
    if rule.kind == "exp":
        inner = _evaluate_on_space(rule.get("of"), space)
        if np.any(np.abs(inner) > 700):
            raise FieldError("exponent exceeds 700 in magnitude; e^f would overflow")
        return rule.scale * np.exp(inner)
    if rule.kind == "product":
        out = np.ones(space.n)
        for f in rule.get("factors"):
            out = out * _evaluate_on_space(f, space)
        return rule.scale * out
    pts = space.coords if space.coords is not None else np.zeros((space.n, 2))
    return evaluate(rule, pts)


# ---------------------------------------------------------------------------
# convexity along geodesics


@dataclass
class CheckReport:
    name: str
    verdict: str
    statistic: float
    tol: float
    violations: list = field(default_factory=list)
    excluded: list = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "verdict": self.verdict,
            "statistic": self.statistic,
            "tol": self.tol,
            "violations": self.violations[:50],
            "n_violations": len(self.violations),
            "excluded": self.excluded,
            **self.details,
        }


def convexity_check(space: LengthSpace, fld: ScalarField, n_geodesics: int = 200, tol: float | None = None,
                    seed: int = 0, samples_per_geodesic: int = 8) -> CheckReport:
    """Midpoint convexity of the field along sampled geodesics.

    defect = (f(t) + f(t'))/2 - f((t + t')/2), interior points by linear
    interpolation along edges. PASS iff the smallest defect >= -tol.
    """
    if tol is None:
        tol = 5.0 * (space.spacing or 0.0)
    rng = np.random.default_rng(seed)
    values = fld.values
    worst = math.inf
    bad = []
    for _ in range(n_geodesics):
        a, b = rng.choice(space.n, size=2, replace=False)
        g = geodesic(space, int(a), int(b))
        for _ in range(samples_per_geodesic):
            t1, t2 = rng.uniform(0.0, g.total, size=2)
            defect = 0.5 * (g.interpolate(values, t1) + g.interpolate(values, t2)) - g.interpolate(values, 0.5 * (t1 + t2))
            worst = min(worst, defect)
            if defect < -tol:
                bad.append({"a": int(a), "b": int(b), "t1": float(t1), "t2": float(t2), "defect": float(defect)})
    return CheckReport("convexity", "PASS" if worst >= -tol else "FAIL", float(worst), tol, bad,
                       details={"min_defect": float(worst), "geodesics": n_geodesics})


# ---------------------------------------------------------------------------
# Laplacians


def triangulation(space: LengthSpace) -> Triangulation:
    if space.triangles is None or space.coords is None:
        raise FieldError("space has no flat triangulation")
    cache = space.__dict__.setdefault("_cache", {})
    if "triangulation" not in cache:
        cache["triangulation"] = Triangulation(space.coords, space.triangles, space.n)
    return cache["triangulation"]


def _require_flat(space: LengthSpace) -> None:
    if space.oracle is None or space.oracle.kind != "euclidean" or space.triangles is None:
        raise FieldError("discrete Laplacian needs a flat (euclidean-tagged) triangulated mesh")


def laplacian_values(space: LengthSpace, values: np.ndarray) -> np.ndarray:
    """Cotangent Laplacian over barycentric area at every vertex (boundary rows too)."""
    tri = triangulation(space)
    lf = tri.laplacian_matrix() @ np.asarray(values, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return lf / tri.vertex_area


def discrete_laplacian(space: LengthSpace, fld: ScalarField) -> ScalarField:
    """Cotangent Laplacian of ``fld`` on the interior vertices of a flat mesh."""
    _require_flat(space)
    interior = np.flatnonzero(space.is_interior())
    lap = laplacian_values(space, fld.values)[interior]
    return ScalarField(lap, support=interior)


def _vanishing_exclusion(space: LengthSpace, values: np.ndarray, zero_tol: float, radius: float):
    vanish = np.flatnonzero(np.abs(values) <= zero_tol)
    if len(vanish) == 0:
        return vanish, np.zeros(space.n, dtype=bool)
    d, _ = cKDTree(space.coords[vanish]).query(space.coords)
    return vanish, d <= radius


def boundary_layer(space: LengthSpace) -> np.ndarray:
    """Interior vertices sharing a triangle with a boundary vertex.

    Where the lattice meets the boundary ring the stars are irregular and the
    cotangent Laplacian is off by O(1) (about 1.0 for |z|^2), so the
    Laplacian checks leave this layer out unless ``rim=True``.
    """
    _require_flat(space)
    tri = np.asarray(space.triangles)
    on_b = ~space.is_interior()
    touch = np.zeros(space.n, dtype=bool)
    hit = on_b[tri].any(axis=1)
    touch[tri[hit].ravel()] = True
    return touch & ~on_b


def subharmonic_check(space: LengthSpace, fld: ScalarField, tol: float | None = None,
                      zero_tol: float = 0.0, exclude_radius: float | None = None,
                      name: str = "subharmonic", rim: bool = False) -> CheckReport:
    """PASS iff the discrete Laplacian >= -tol away from where the field vanishes.

    The boundary layer (see :func:`boundary_layer`) is skipped unless ``rim``.
    """
    skip = None if rim else boundary_layer(space)
    return _laplacian_check(space, fld.values, fld.values, tol, zero_tol, exclude_radius, name, skip)


def log_subharmonic_check(space: LengthSpace, fld: ScalarField, tol: float | None = None,
                          zero_tol: float = 0.0, exclude_radius: float | None = None,
                          skip=None, rim: bool = False) -> CheckReport:
    """PASS iff the discrete Laplacian of log(field) >= -tol away from its zeros.

    Vertices within ``exclude_radius`` (default 2h) of a zero are skipped and
    listed. On a regular lattice the truncation error of the cotangent
    Laplacian of ``log|z - p|`` decays like ``h**4 / r**6``, so a wider
    radius is needed when ``tol`` is tight. ``skip`` is an optional boolean
    mask of further vertices to leave out (they are listed as excluded), on
    top of the boundary layer, which is kept only when ``rim`` is set.
    """
    v = fld.values
    if np.any(v < -zero_tol):
        raise FieldError("log-subharmonic check on a field with negative values")
    logs = np.where(v > zero_tol, np.log(np.maximum(v, 1e-300)), 0.0)
    if not rim:
        layer = boundary_layer(space)
        skip = layer if skip is None else (np.asarray(skip, dtype=bool) | layer)
    return _laplacian_check(space, logs, v, tol, zero_tol, exclude_radius, "log-subharmonic", skip)


def _laplacian_check(space, target_values, raw_values, tol, zero_tol, exclude_radius, name,
                     skip=None) -> CheckReport:
    _require_flat(space)
    h = space.spacing or 0.0
    if tol is None:
        tol = 5.0 * h
    if exclude_radius is None:
        exclude_radius = 2.0 * h
    interior = space.is_interior()
    vanish, near = _vanishing_exclusion(space, raw_values, zero_tol, exclude_radius)
    if skip is not None:
        near = near | np.asarray(skip, dtype=bool)
    lap = laplacian_values(space, target_values)
    tested = interior & ~near
    excluded = np.flatnonzero(interior & near)
    base = {"vanishing": vanish.tolist(), "exclude_radius": exclude_radius}
    if not np.any(tested):
        return CheckReport(name, "PASS", math.inf, tol, [], excluded.tolist(),
                           details={**base, "degenerate": True, "tested": 0})
    vals = lap[tested]
    ids = np.flatnonzero(tested)
    worst = float(vals.min())
    bad = [{"vertex": int(i), "laplacian": float(x)} for i, x in zip(ids, vals) if x < -tol]
    return CheckReport(name, "PASS" if worst >= -tol else "FAIL", worst, tol, bad, excluded.tolist(),
                       details={**base, "min_laplacian": worst, "tested": int(tested.sum()),
                                "degenerate": False})
