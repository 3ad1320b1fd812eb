"""Conformal change of a length space by a positive factor, and its checks."""

from __future__ import annotations

import math
from typing import Any

import numpy as np
from scipy.spatial import cKDTree

from .fields import (
    CheckReport, FieldError, Rule, ScalarField, evaluate, laplacian_values, make_field, space_metric,
)
from .mesh import heron, side_lengths, triangle_angles
from .metric import LengthSpace, Oracle
from .models import NOT_NPC

QUADRATURES = ("trapezoid", "midpoint", "segment")
# composite Gauss-Legendre used by the "segment" rule
_PANELS = 4
_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
_CHUNK = 100_000


def _as_factor(space: LengthSpace, factor) -> tuple[ScalarField | None, Rule | None]:
    if isinstance(factor, ScalarField):
        return factor, factor.rule
    rule = Rule.from_json(factor)
    try:
        return make_field(space, rule), rule
    except FieldError:
        # e.g. |z|^alpha with alpha < 0 is infinite at the origin; only
        # quadratures that never sample vertices can use it
        return None, rule


def _segment_nodes() -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(0.0, 1.0, _PANELS + 1)
    s = np.concatenate([lo + (hi - lo) * 0.5 * (_GL_X + 1.0) for lo, hi in zip(edges[:-1], edges[1:])])
    w = np.tile(0.5 * _GL_W / _PANELS, _PANELS)
    return s, w


def edge_factors(space: LengthSpace, factor, quadrature: str = "trapezoid") -> np.ndarray:
    """Per-edge multiplier q(a, b) so that the new weight is ``w * q``."""
    if quadrature not in QUADRATURES:
        raise FieldError(f"unknown quadrature {quadrature!r}; expected one of {QUADRATURES}")
    fld, rule = _as_factor(space, factor)
    a, b = space.edges[:, 0], space.edges[:, 1]
    dist, vpoint = space_metric(space)
    use_rule = rule is not None and space.coords is not None and (dist is not None or not _needs_metric(rule))
    if quadrature == "trapezoid" or (not use_rule and quadrature == "segment"):
        rho = _vertex_values(fld)
        return _checked(0.5 * (rho[a] + rho[b]))
    if quadrature == "midpoint":
        if use_rule:
            mid = 0.5 * (space.coords[a] + space.coords[b])
            q = evaluate(rule, mid, dist, vpoint)
        else:
            rho = _vertex_values(fld)
            q = np.sqrt(rho[a] * rho[b])
        return _checked(q)
    s, w = _segment_nodes()
    out = np.empty(len(a))
    for lo in range(0, len(a), _CHUNK):
        pa = space.coords[a[lo:lo + _CHUNK]]
        pb = space.coords[b[lo:lo + _CHUNK]]
        pts = pa[:, None, :] + s[None, :, None] * (pb - pa)[:, None, :]
        vals = evaluate(rule, pts.reshape(-1, 2), dist, vpoint).reshape(len(pa), len(s))
        out[lo:lo + _CHUNK] = vals @ w
    return _checked(out)


def _needs_metric(rule: Rule) -> bool:
    if rule.kind in ("distance-to-point", "distance-to-set"):
        return True
    if rule.kind == "exp":
        return _needs_metric(rule.get("of"))
    if rule.kind == "product":
        return any(_needs_metric(f) for f in rule.get("factors"))
    return False


def _vertex_values(fld: ScalarField | None) -> np.ndarray:
    if fld is None:
        raise FieldError("factor is not finite at every vertex; use quadrature='segment'")
    if np.any(fld.values < 0):
        raise FieldError("conformal factor must be non-negative at every vertex")
    return fld.values


def _checked(q: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(q)) or np.any(q <= 0):
        raise FieldError("conformal factor must be positive and finite along every edge")
    return q


def conformal_change(space: LengthSpace, factor, quadrature: str = "trapezoid") -> LengthSpace:
    """The space ``factor * space``: same graph, each edge weight scaled.

    ``trapezoid`` averages the endpoint values, ``midpoint`` evaluates the
    factor's rule at the chart midpoint (geometric mean of the endpoint
    values when there is no rule), ``segment`` integrates the rule along the
    chart segment with composite Gauss-Legendre. The oracle tag is dropped
    except for ``|z|^alpha`` on a flat chart, which is the cone of total
    angle ``2 pi (1 + alpha)``.

    The spacing label is multiplied by the largest edge factor: it is the
    coarsest local mesh resolution in the new metric, so tolerances derived
    from it scale with the weights.
    """
    q = edge_factors(space, factor, quadrature)
    _, rule = _as_factor(space, factor) if not isinstance(factor, ScalarField) else (factor, factor.rule)
    oracle = None
    labels = {k: v for k, v in space.labels.items() if k != "curvature"}
    labels["conformal"] = {"quadrature": quadrature, "factor": rule.to_json() if rule else None}
    if (rule is not None and rule.kind == "power-radial" and rule.scale == 1.0
            and space.oracle is not None and space.oracle.kind == "euclidean"):
        alpha = float(rule.get("alpha"))
        theta = 2 * math.pi * (1 + alpha)
        if theta > 0:
            oracle = Oracle("cone", total_angle=theta)
            labels["model"] = "cone"
            labels["total_angle"] = theta
            if theta < 2 * math.pi:
                labels["curvature"] = NOT_NPC
    spacing = None if space.spacing is None else space.spacing * float(q.max())
    if space.spacing is not None:
        labels["base_spacing"] = labels.get("base_spacing", space.spacing)
    return space.with_weights(space.weights * q, oracle=oracle, labels=labels, spacing=spacing)


def exp_factor(f: ScalarField) -> ScalarField:
    """e^f as a positive field; rejects exponents beyond 700 in magnitude."""
    if np.any(np.abs(f.values) > 700):
        raise FieldError("exponent exceeds 700 in magnitude; e^f would overflow")
    rule = Rule.make("exp", of=f.rule.to_json()) if f.rule is not None else None
    return ScalarField(np.exp(f.values), rule, positive=True, meta={"lower_bound": math.exp(f.min())})


# ---------------------------------------------------------------------------
# checks


def _sample_pairs(n: int, n_pairs: int, rng: np.random.Generator, per_source: int = 50):
    n_src = max(1, -(-n_pairs // per_source))
    src = rng.choice(n, size=min(n_src, n), replace=False)
    pairs = []
    for s in src:
        for t in rng.choice(n, size=per_source, replace=True):
            if t != s and len(pairs) < n_pairs:
                pairs.append((int(s), int(t)))
    return pairs


def pair_distances(space: LengthSpace, pairs) -> np.ndarray:
    src = sorted({a for a, _ in pairs})
    rows = dict(zip(src, space.rows(src)))
    return np.array([rows[a][b] for a, b in pairs])


def _product_factor(space, rho1, rho2):
    f1, r1 = _as_factor(space, rho1)
    f2, r2 = _as_factor(space, rho2)
    rule = r1 * r2 if r1 is not None and r2 is not None else None
    values = f1.values * f2.values if f1 is not None and f2 is not None else None
    if values is None:
        return rule
    return ScalarField(values, rule, positive=True)


def lipschitz_bound(space: LengthSpace, fld: ScalarField) -> float:
    """Largest |f(a) - f(b)| / w(a, b) over edges."""
    a, b = space.edges[:, 0], space.edges[:, 1]
    return float(np.max(np.abs(fld.values[a] - fld.values[b]) / space.weights))


def composition_law_check(space: LengthSpace, rho1, rho2, n_pairs: int = 1000, seed: int = 0,
                          quadrature: str = "trapezoid") -> CheckReport:
    """Compare ``rho2 * (rho1 * X)`` with ``(rho1 rho2) * X`` on sampled pairs.

    Midpoint quadrature must agree to 1e-12 (relative). Trapezoid and
    segment rules average each factor separately, so the two sides differ by
    a mean-of-products gap; they pass iff the gap is at most ``2 h Lip``.
    """
    two_step = conformal_change(conformal_change(space, rho1, quadrature), rho2, quadrature)
    one_step = conformal_change(space, _product_factor(space, rho1, rho2), quadrature)
    rng = np.random.default_rng(seed)
    pairs = _sample_pairs(space.n, n_pairs, rng)
    d2 = pair_distances(two_step, pairs)
    d1 = pair_distances(one_step, pairs)
    rel = np.abs(d2 - d1) / np.maximum(d1, 1e-300)
    gap = float(rel.max())
    h = space.spacing or 0.0
    details: dict[str, Any] = {"quadrature": quadrature, "pairs": len(pairs), "max_relative_gap": gap}
    if quadrature != "midpoint":
        fields = [_as_factor(space, r)[0] for r in (rho1, rho2)]
        if any(f is None for f in fields):
            raise FieldError("composition check needs factors that are finite at every vertex")
        lip = max(lipschitz_bound(space, f) for f in fields)
        tol = 2.0 * h * lip
        details["lipschitz"] = lip
    else:
        tol = 1e-12
    worst = int(np.argmax(rel))
    bad = [{"pair": list(pairs[worst]), "two_step": float(d2[worst]), "one_step": float(d1[worst])}] \
        if gap > tol else []
    return CheckReport("composition-law", "PASS" if gap <= tol else "FAIL", gap, tol, bad, details=details)


def angle_defect_curvature(space: LengthSpace, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gauss curvature estimate (defect / barycentric area) after trapezoid reweighting.

    Returns ``(curvature, area)`` per vertex; boundary rows are meaningless.
    """
    tri = space.triangles
    L = side_lengths(space.coords, tri)
    # side k is opposite vertex k and joins the other two
    i = tri[:, [1, 2, 0]]
    j = tri[:, [2, 0, 1]]
    L = L * 0.5 * (rho[i] + rho[j])
    ang = triangle_angles(L)
    angle_sum = np.bincount(tri.ravel(), weights=ang.ravel(), minlength=space.n)
    area = np.bincount(tri.ravel(), weights=np.repeat(heron(L) / 3.0, 3), minlength=space.n)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (2 * math.pi - angle_sum) / area, area


def conformal_curvature_check(space: LengthSpace, f, C_max: float = 1.0,
                              margin: float = 4.0) -> CheckReport:
    """Curvature of ``e^{2f}|dz|^2`` against ``-e^{-2f} Delta f``.

    The residual ``|K + e^{-2f} Delta f|`` is taken over interior vertices at
    least ``margin * h`` from the boundary; ``C = max residual / h`` and the
    check passes iff ``C <= C_max``.
    """
    if space.oracle is None or space.oracle.kind != "euclidean" or space.triangles is None:
        raise FieldError("curvature check needs a flat triangulated mesh")
    fld = f if isinstance(f, ScalarField) else make_field(space, f)
    h = float(space.spacing)
    curv, _ = angle_defect_curvature(space, np.exp(fld.values))
    lap = laplacian_values(space, fld.values)
    predicted = -np.exp(-2 * fld.values) * lap
    dist_b, _ = cKDTree(space.coords[space.boundary]).query(space.coords)
    keep = space.is_interior() & (dist_b >= margin * h)
    resid = np.abs(curv - predicted)
    ids = np.flatnonzero(keep)
    worst = ids[int(np.argmax(resid[keep]))]
    max_res = float(resid[worst])
    C = max_res / h
    origin = int(np.argmin(np.linalg.norm(space.coords, axis=1)))
    details = {
        "max_residual": max_res, "C": C, "C_max": C_max, "h": h, "vertices": int(keep.sum()),
        "curvature_at_origin": float(curv[origin]), "predicted_at_origin": float(predicted[origin]),
        "worst_vertex": int(worst), "worst_point": space.coords[worst].tolist(),
    }
    verdict = "PASS" if C <= C_max else "FAIL"
    return CheckReport("conformal-curvature", verdict, C, C_max, [] if verdict == "PASS" else [int(worst)],
                       details=details)
