"""Model spaces with closed-form metrics: flat and hyperbolic discs, cones, star trees."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import _kernels as K
from .mesh import disc_chart, estimate_disc_vertices, neighbor_pairs, triangle_edges
from .metric import LengthSpace, Oracle, SpaceError, build_space

DEFAULT_VERTEX_BUDGET = 250_000
#: neighbour radius is NEIGHBOR_SCALE * sqrt(h * radius); see README
NEIGHBOR_SCALE = 0.707
NOT_NPC = "not non-positively curved at apex"


@dataclass(frozen=True)
class ModelSpec:
    kind: str  # flat-disc | hyperbolic-disc | cone | tree
    radius: float = 1.0
    spacing: float = 0.02
    total_angle: float | None = None
    legs: tuple[float, ...] | None = None
    neighbor_scale: float = NEIGHBOR_SCALE
    vertex_budget: int = DEFAULT_VERTEX_BUDGET
    extra: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in ("flat-disc", "hyperbolic-disc", "cone", "tree"):
            raise SpaceError(f"unknown model kind {self.kind!r}")
        if not self.spacing > 0:
            raise SpaceError("spacing h must be positive")
        if self.kind != "tree" and not self.radius > 0:
            raise SpaceError("radius must be positive")
        if self.kind == "hyperbolic-disc" and not self.radius < 1:
            raise SpaceError("hyperbolic disc radius is a Poincare chart radius and must be < 1")
        if self.kind == "cone" and not (self.total_angle is not None and self.total_angle > 0):
            raise SpaceError("cone needs total_angle > 0")
        if self.kind == "tree":
            if not self.legs or any(not leg > 0 for leg in self.legs):
                raise SpaceError("tree needs positive leg lengths")

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "ModelSpec":
        known = {"kind", "radius", "spacing", "total_angle", "legs", "neighbor_scale", "vertex_budget"}
        unknown = set(data) - known
        if unknown:
            raise SpaceError(f"unknown ModelSpec field(s): {sorted(unknown)}")
        kw = dict(data)
        if "legs" in kw and kw["legs"] is not None:
            kw["legs"] = tuple(float(x) for x in kw["legs"])
        return cls(**kw)

    def to_json(self) -> dict[str, Any]:
        out = {k: v for k, v in asdict(self).items() if v is not None and k != "extra"}
        if self.legs is not None:
            out["legs"] = list(self.legs)
        return out

    def with_spacing(self, h: float) -> "ModelSpec":
        kw = asdict(self)
        kw["spacing"] = h
        return ModelSpec(**kw)


def generate(spec: ModelSpec) -> LengthSpace:
    """Build the mesh for ``spec``; edge weights are exact model distances."""
    if spec.kind in ("flat-disc", "hyperbolic-disc"):
        return _disc(spec)
    if spec.kind == "cone":
        return _cone(spec)
    return _tree(spec)


def neighbor_radius(spec: ModelSpec) -> float:
    return max(1.5 * spec.spacing, spec.neighbor_scale * math.sqrt(spec.spacing * spec.radius))


def _budget(spec: ModelSpec, n: int) -> None:
    if n > spec.vertex_budget:
        raise SpaceError(f"mesh would have ~{n} vertices, over the budget of {spec.vertex_budget}")


def _disc(spec: ModelSpec) -> LengthSpace:
    _budget(spec, estimate_disc_vertices(spec.radius, spec.spacing))
    pts, boundary, tri = disc_chart(spec.radius, spec.spacing)
    pairs = neighbor_pairs(pts, neighbor_radius(spec)) if spec.neighbor_scale > 0 else np.empty((0, 2), np.int64)
    edges = np.vstack([pairs, triangle_edges(tri)])
    a, b = pts[edges[:, 0]], pts[edges[:, 1]]
    if spec.kind == "flat-disc":
        w = np.linalg.norm(a - b, axis=1)
        oracle = Oracle("euclidean")
    else:
        w = poincare_distance(a, b)
        oracle = Oracle("hyperbolic")
    return build_space(len(pts), np.column_stack([edges, w]), pts, boundary, oracle=oracle,
                       triangles=tri, spacing=spec.spacing, labels={"model": spec.kind})


def _cone(spec: ModelSpec) -> LengthSpace:
    theta = float(spec.total_angle)
    nring = max(2, int(round(spec.radius / spec.spacing)))
    step = spec.radius / nring
    counts = np.array([1] + [max(3, int(round(theta * k))) for k in range(1, nring + 1)], dtype=np.int64)
    _budget(spec, int(counts.sum()))
    radii = step * np.arange(nring + 1, dtype=float)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
    offsets = np.array([0.5 * (k % 2) for k in range(nring + 1)])
    r = np.repeat(radii, counts)
    phi = np.concatenate([(np.arange(m) + off) * theta / m for m, off in zip(counts, offsets)])
    rnb = max(1.5 * step, spec.neighbor_scale * math.sqrt(step * spec.radius))
    ii, jj, ww = K.cone_ring_pairs(radii, starts, counts, offsets, theta, rnb)
    coords = cone_to_chart(r, phi, theta)
    boundary = np.arange(starts[-1], starts[-1] + counts[-1])
    labels = {"model": "cone", "total_angle": theta}
    if theta < 2 * math.pi:
        labels["curvature"] = NOT_NPC
    return build_space(len(r), np.column_stack([ii, jj, ww]), coords, boundary,
                       oracle=Oracle("cone", total_angle=theta), spacing=spec.spacing, labels=labels)


def _tree(spec: ModelSpec) -> LengthSpace:
    legs = tuple(float(x) for x in spec.legs)
    m = len(legs)
    coords = [(0.0, 0.0)]
    edges = []
    for k, length in enumerate(legs):
        nseg = max(1, int(math.ceil(length / spec.spacing - 1e-9)))
        ang = 2 * math.pi * k / m
        prev = 0
        for i in range(1, nseg + 1):
            t = length * i / nseg
            coords.append((t * math.cos(ang), t * math.sin(ang)))
            v = len(coords) - 1
            edges.append((prev, v, length / nseg))
            prev = v
    _budget(spec, len(coords))
    return build_space(len(coords), edges, coords, oracle=Oracle("tree", legs=legs),
                       spacing=spec.spacing, labels={"model": "tree"})


# ---------------------------------------------------------------------------
# closed forms


def poincare_distance(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Hyperbolic distance (curvature -1) between Poincare-disc points (..., 2)."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    num = np.linalg.norm(z - w, axis=-1)
    den = np.sqrt((1 - np.sum(z * z, axis=-1)) * (1 - np.sum(w * w, axis=-1)))
    return 2.0 * np.arcsinh(num / den)


def cone_distance(r1, t1, r2, t2, total_angle):
    """Distance on the Euclidean cone of total angle Θ in polar coordinates."""
    r1, t1, r2, t2 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (r1, t1, r2, t2)))
    d = np.abs(t1 - t2) % total_angle
    d = np.minimum(d, total_angle - d)
    chord = np.sqrt(np.maximum(r1 ** 2 + r2 ** 2 - 2 * r1 * r2 * np.cos(np.minimum(d, np.pi)), 0.0))
    return np.where(d >= np.pi, r1 + r2, chord)


def cone_to_chart(r, phi, total_angle):
    """Cone polar coordinates to the conformal chart where the metric is |z|^α|dz|."""
    s = total_angle / (2 * math.pi)
    rho = (s * np.asarray(r, dtype=float)) ** (1.0 / s)
    ang = np.asarray(phi, dtype=float) / s
    return np.column_stack([rho * np.cos(ang), rho * np.sin(ang)])


def chart_to_cone(z, total_angle):
    s = total_angle / (2 * math.pi)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    rho = np.hypot(z[:, 0], z[:, 1])
    ang = np.mod(np.arctan2(z[:, 1], z[:, 0]), 2 * math.pi)
    return rho ** s / s, ang * s


def tree_position(z, legs):
    z = np.atleast_2d(np.asarray(z, dtype=float))
    m = len(legs)
    t = np.hypot(z[:, 0], z[:, 1])
    ang = np.mod(np.arctan2(z[:, 1], z[:, 0]), 2 * math.pi)
    leg = np.mod(np.rint(ang / (2 * math.pi / m)), m)
    return leg, t


def oracle_distance(oracle: Oracle, p, q) -> np.ndarray:
    """Closed-form distance between chart points ``p`` and ``q`` (broadcast)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p, q = np.broadcast_arrays(p, q)
    shape = p.shape[:-1]
    p2 = p.reshape(-1, 2)
    q2 = q.reshape(-1, 2)
    if oracle.kind == "euclidean":
        out = np.linalg.norm(p2 - q2, axis=1)
    elif oracle.kind == "hyperbolic":
        out = poincare_distance(p2, q2)
    elif oracle.kind == "cone":
        r1, t1 = chart_to_cone(p2, oracle.total_angle)
        r2, t2 = chart_to_cone(q2, oracle.total_angle)
        out = cone_distance(r1, t1, r2, t2, oracle.total_angle)
    elif oracle.kind == "tree":
        l1, t1 = tree_position(p2, oracle.legs)
        l2, t2 = tree_position(q2, oracle.legs)
        same = (l1 == l2) | (t1 == 0) | (t2 == 0)
        out = np.where(same, np.abs(t1 - t2), t1 + t2)
    else:  # pragma: no cover
        raise SpaceError(f"unknown oracle {oracle.kind!r}")
    return out.reshape(shape)


def exact_distance(space: LengthSpace, a, b):
    """Closed-form distance between vertices (or vertex arrays) of a tagged space."""
    if space.oracle is None:
        raise SpaceError("space carries no oracle tag")
    if space.coords is None:
        raise SpaceError("oracle distance needs vertex coordinates")
    return oracle_distance(space.oracle, space.coords[np.asarray(a)], space.coords[np.asarray(b)])


def nearest_vertex(space: LengthSpace, point) -> int:
    if space.coords is None:
        raise SpaceError("space has no coordinates")
    return int(np.argmin(np.linalg.norm(space.coords - np.asarray(point, dtype=float), axis=1)))


@dataclass
class FidelityReport:
    """Mesh vs closed-form distances on sampled vertex pairs."""

    model: str
    h: float
    pairs: int
    max_relative_error: float
    mean_relative_error: float
    max_absolute_error: float

    @property
    def constant(self) -> float:
        """``C`` in ``max relative error <= C h``."""
        return self.max_relative_error / self.h

    def to_dict(self) -> dict[str, Any]:
        return {**asdict(self), "C": self.constant}


def oracle_fidelity(space: LengthSpace, n_pairs: int = 1000, seed: int = 0, per_source: int = 50,
                    min_distance: float | None = None) -> FidelityReport:
    """Compare shortest-path distances with the oracle on seeded pairs.

    Pairs closer than ``min_distance`` (default 2h) are redrawn: below mesh
    scale the relative error says nothing about convergence.
    """
    if space.oracle is None or space.coords is None:
        raise SpaceError("fidelity check needs an oracle-tagged space with coordinates")
    h = float(space.spacing or 0.0)
    floor = 2.0 * h if min_distance is None else min_distance
    rng = np.random.default_rng(seed)
    n_src = max(1, -(-n_pairs // per_source))
    src = rng.choice(space.n, size=min(n_src, space.n), replace=False)
    rows = space.rows(src)
    errs, rels = [], []
    for s, row in zip(src, rows):
        exact = oracle_distance(space.oracle, space.coords[s], space.coords)
        ok = np.flatnonzero(exact >= floor)
        pick = rng.choice(ok, size=min(per_source, len(ok)), replace=False) if len(ok) else ok
        e = row[pick] - exact[pick]
        errs.append(np.abs(e))
        rels.append(np.abs(e) / exact[pick])
    err = np.concatenate(errs)[:n_pairs]
    rel = np.concatenate(rels)[:n_pairs]
    return FidelityReport(space.labels.get("model", space.oracle.kind), h, int(len(rel)), float(rel.max()),
                          float(rel.mean()), float(err.max()))
