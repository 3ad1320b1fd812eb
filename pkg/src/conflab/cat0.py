"""Numerical CAT(0) recognition: comparison triangles, distance convexity, majorization.

A scan is a falsifier: a FAIL is evidence of a curvature violation at a scale
above the mesh spacing, a PASS is evidence up to sampling and tolerance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import _kernels as K
from .fields import CheckReport
from .metric import TIE_RTOL, LengthSpace, SpaceError, geodesic
from .targets import TargetSpace

SCAN_NOTE = ("comparison scans falsify: FAIL means a sampled triangle is fatter than its "
             "Euclidean comparison beyond tol; PASS is evidence up to sampling")
CSV_COLUMNS = ("v0", "v1", "v2", "t1", "t2", "actual", "comparison", "slack")


class MajorizationError(SpaceError):
    """The map does not send the boundary cycle into the target curve."""


@dataclass
class ComparisonReport:
    triangles_tested: int
    min_slack: float
    mean_slack: float
    tol: float
    worst_triangle: dict[str, Any] | None
    rows: list[tuple] = field(default_factory=list, repr=False)
    skipped: dict[str, int] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "PASS" if self.min_slack >= -self.tol else "FAIL"

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": "cat0-scan",
            "verdict": self.verdict,
            "triangles_tested": self.triangles_tested,
            "min_slack": self.min_slack,
            "mean_slack": self.mean_slack,
            "tol": self.tol,
            "worst_triangle": self.worst_triangle,
            "skipped": self.skipped,
            "note": SCAN_NOTE,
        }

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                w.writerow([r[0], r[1], r[2]] + [repr(float(x)) for x in r[3:]])


def _default_tol(space: LengthSpace, tol):
    if tol is not None:
        return float(tol)
    if space.spacing is None:
        raise SpaceError("tol is required for a space without a mesh spacing")
    return 3.0 * space.spacing


def _coords_arg(space: LengthSpace) -> np.ndarray:
    return space.coords if space.coords is not None else np.zeros((0, 2))


def comparison_points(l0: float, l1: float, l2: float) -> np.ndarray:
    """Planar triangle with sides |p0p1| = l0, |p1p2| = l1, |p2p0| = l2."""
    cx = (l2 * l2 + l0 * l0 - l1 * l1) / (2.0 * l0) if l0 > 0 else 0.0
    cy = math.sqrt(max(l2 * l2 - cx * cx, 0.0))
    return np.array([[0.0, 0.0], [l0, 0.0], [cx, cy]])


def _snap_side(space, a, b, n_side):
    rtol = TIE_RTOL
    ra, rb = space.row(a), space.row(b)
    total = float(ra[b])
    if space.coords is not None and total > 0:
        tied = np.flatnonzero(ra + rb - total <= rtol * total)
        za, zb = space.coords[a], space.coords[b]
        verts = []
        for j in range(n_side):
            frac = j / (n_side - 1)
            goal = (1 - frac) * za + frac * zb
            score = (ra[tied] - frac * total) ** 2 + np.sum((space.coords[tied] - goal) ** 2, axis=1)
            verts.append(int(tied[int(np.argmin(score))]))
        chained = all(
            abs(ra[u] + space.row(u)[v] - ra[v]) <= rtol * total and ra[v] >= ra[u]
            for u, v in zip(verts[:-1], verts[1:])
        )
        if chained:
            return verts, [float(ra[v]) / total for v in verts]
    g = geodesic(space, a, b)
    verts, params = [], []
    for j in range(n_side):
        goal = j / (n_side - 1) * g.total
        k = int(np.argmin(np.abs(g.cumulative - goal)))
        verts.append(int(g.vertices[k]))
        params.append(g.cumulative[k] / g.total if g.total > 0 else 0.0)
    return verts, params


def comparison_test(space: LengthSpace, triangle: Sequence[int], n_side_points: int = 5,
                    tol: float | None = None) -> ComparisonReport:
    """Comparison test of one geodesic triangle.

    Each side contributes ``n_side_points`` vertices at roughly equal
    arc-length fractions (endpoints included), all on one shortest path.
    When several shortest paths tie exactly (lattices), the vertex nearest
    the chart interpolation is preferred. A vertex's comparison image sits at
    its own arc-length parameter, so the correspondence is exact.
    Slack = comparison distance - actual distance.
    """
    tol = _default_tol(space, tol)
    a = [space._check_vertex(v) for v in triangle]
    if len(set(a)) != 3:
        raise SpaceError("triangle needs three distinct vertices")
    if n_side_points < 2:
        raise SpaceError("need at least two points per side")
    ends = [a[0], a[1], a[2], a[0]]
    lens = [float(space.row(ends[s])[ends[s + 1]]) for s in range(3)]
    l0, l1, l2 = lens
    if max(l0 - l1 - l2, l1 - l0 - l2, l2 - l0 - l1) > 1e-9 * max(1.0, sum(lens)):
        raise SpaceError("side lengths violate the triangle inequality; corrupted space")
    p = comparison_points(l0, l1, l2)
    sides = [_snap_side(space, ends[s], ends[s + 1], n_side_points) for s in range(3)]
    perim = sum(lens)
    offs = [0.0, l0, l0 + l1]
    best, total, count, worst = math.inf, 0.0, 0, None
    for s1 in range(3):
        for s2 in range(s1 + 1, 3):
            for v1, u in zip(*sides[s1]):
                x = p[s1] + u * (p[(s1 + 1) % 3] - p[s1])
                row = space.row(v1)
                for v2, w in zip(*sides[s2]):
                    y = p[s2] + w * (p[(s2 + 1) % 3] - p[s2])
                    comp = float(np.hypot(*(x - y)))
                    act = float(row[v2])
                    slack = comp - act
                    total += slack
                    count += 1
                    if slack < best:
                        best = slack
                        worst = ((offs[s1] + u * lens[s1]) / perim, (offs[s2] + w * lens[s2]) / perim, act, comp)
    wt = {"vertices": a, "t1": worst[0], "t2": worst[1], "actual": worst[2], "comparison": worst[3]}
    return ComparisonReport(1, best, total / count, tol, wt, [(*a, *worst, best)])


def sample_triangles(space: LengthSpace, D: np.ndarray, n_triangles: int, seed: int,
                     cluster_radius: float, min_side: float, max_tries: int = 200) -> tuple[np.ndarray, int]:
    """Seeded triples: even draws uniform, odd draws within ``cluster_radius`` of a center.

    Triangles with a side shorter than ``min_side`` are redrawn; returns the
    triples and the number of draws that gave up.
    """
    rng = np.random.default_rng(seed)
    out = np.empty((n_triangles, 3), dtype=np.int64)
    got = 0
    gave_up = 0
    k = 0
    while got < n_triangles and k < n_triangles + gave_up + 1:
        k += 1
        cluster = got % 2 == 1
        for _ in range(max_tries):
            if cluster:
                c = int(rng.integers(space.n))
                pool = np.flatnonzero(D[c] <= cluster_radius)
                if len(pool) < 3:
                    continue
                tri = rng.choice(pool, size=3, replace=False)
            else:
                tri = rng.choice(space.n, size=3, replace=False)
            if min(D[tri[0], tri[1]], D[tri[1], tri[2]], D[tri[2], tri[0]]) >= min_side:
                out[got] = tri
                got += 1
                break
        else:
            gave_up += 1
            if gave_up > n_triangles:
                break
    return out[:got], gave_up


def cat0_scan(space: LengthSpace, n_triangles: int = 1000, n_side_points: int = 5, tol: float | None = None,
              seed: int = 0, cluster_radius: float | None = None, min_side: float | None = None) -> ComparisonReport:
    """Aggregate comparison test over seeded triangles (half of them clustered)."""
    tol = _default_tol(space, tol)
    h = space.spacing if space.spacing is not None else tol / 3.0
    cluster_radius = 10.0 * h if cluster_radius is None else cluster_radius
    min_side = 4.0 * h if min_side is None else min_side
    if n_side_points < 2:
        raise SpaceError("need at least two points per side")
    D = space.all_pairs()
    tris, gave_up = sample_triangles(space, D, n_triangles, seed, cluster_radius, min_side)
    out_f = np.zeros((len(tris), 6))
    out_i = np.zeros((len(tris), 2), dtype=np.int64)
    K.comparison_scan(*space.csr, D, _coords_arg(space), tris, n_side_points, TIE_RTOL, out_f, out_i)
    if np.any(out_i[:, 1] == 1):
        k = int(np.flatnonzero(out_i[:, 1] == 1)[0])
        raise SpaceError(f"triangle {tris[k].tolist()} violates the triangle inequality; corrupted space")
    ok = out_i[:, 1] == 0
    skipped = {"unsampled": int(gave_up), "walk_failures": int(np.sum(out_i[:, 1] == 2))}
    if not np.any(ok):
        return ComparisonReport(0, math.inf, math.nan, tol, None, [], skipped)
    mins = out_f[ok, 0]
    mean = float(out_f[ok, 1].sum() / out_i[ok, 0].sum())
    idx = np.flatnonzero(ok)
    rows = [(int(tris[k, 0]), int(tris[k, 1]), int(tris[k, 2]), out_f[k, 2], out_f[k, 3], out_f[k, 4],
             out_f[k, 5], out_f[k, 0]) for k in idx]
    w = idx[int(np.argmin(mins))]
    worst = {"vertices": tris[w].tolist(), "t1": float(out_f[w, 2]), "t2": float(out_f[w, 3]),
             "actual": float(out_f[w, 4]), "comparison": float(out_f[w, 5])}
    return ComparisonReport(int(ok.sum()), float(mins.min()), mean, tol, worst, rows, skipped)


# ---------------------------------------------------------------------------
# convexity of the distance between geodesics


class _EdgePoint:
    __slots__ = ("u", "v", "off", "w")

    def __init__(self, u, v, off, w):
        self.u, self.v, self.off, self.w = u, v, off, w


def _edge_point(g, frac) -> _EdgePoint:
    u, v, off = g.point_at(frac * g.total)
    w = 0.0 if u == v else float(g.space.row(u)[v])
    return _EdgePoint(u, v, off, w)


def metric_graph_distance(space: LengthSpace, p: _EdgePoint, q: _EdgePoint) -> float:
    """Distance between points inside edges.

    The smaller of the metric-graph distance (through edge endpoints) and the
    bilinear interpolation of the endpoint distances. Both over-estimate: the
    first detours through vertices, the second is a chord of a function that
    is convex along each edge in a CAT(0) space.
    """
    if {p.u, p.v} == {q.u, q.v} and p.u != p.v:
        oq = q.off if q.u == p.u else q.w - q.off
        return abs(p.off - oq)
    sp = p.off / p.w if p.w > 0 else 0.0
    sq = q.off / q.w if q.w > 0 else 0.0
    ru, rv = space.row(p.u), space.row(p.v)
    best = math.inf
    for row, sx in ((ru, p.off), (rv, p.w - p.off)):
        for y, sy in ((q.u, q.off), (q.v, q.w - q.off)):
            best = min(best, sx + row[y] + sy)
    bilinear = ((1 - sp) * ((1 - sq) * ru[q.u] + sq * ru[q.v])
                + sp * ((1 - sq) * rv[q.u] + sq * rv[q.v]))
    return float(min(best, bilinear))


def geodesic_distance_convexity(space: LengthSpace, n_pairs: int = 200, tol: float | None = None,
                                seed: int = 0, samples: int = 8, cluster_radius: float | None = None) -> CheckReport:
    """Midpoint convexity of ``t -> d(g1(t), g2(t))`` for sampled geodesic pairs.

    Half of the pairs have all four endpoints within ``cluster_radius`` (10h)
    of a random center. Points inside edges are measured in the metric graph.
    """
    tol = _default_tol(space, tol)
    h = space.spacing if space.spacing is not None else tol / 3.0
    cluster_radius = 10.0 * h if cluster_radius is None else cluster_radius
    rng = np.random.default_rng(seed)
    worst = math.inf
    bad = []
    done = 0
    for k in range(n_pairs):
        if k % 2 == 1:
            c = int(rng.integers(space.n))
            pool = np.flatnonzero(space.row(c) <= cluster_radius)
            if len(pool) < 4:
                continue
            ends = rng.choice(pool, size=4, replace=False)
        else:
            ends = rng.choice(space.n, size=4, replace=False)
        g1 = geodesic(space, int(ends[0]), int(ends[1]))
        g2 = geodesic(space, int(ends[2]), int(ends[3]))
        done += 1

        def d(t):
            return metric_graph_distance(space, _edge_point(g1, t), _edge_point(g2, t))

        for _ in range(samples):
            t1, t2 = rng.uniform(0.0, 1.0, size=2)
            defect = 0.5 * (d(t1) + d(t2)) - d(0.5 * (t1 + t2))
            if defect < worst:
                worst = defect
            if defect < -tol:
                bad.append({"geodesics": [int(x) for x in ends], "t1": float(t1), "t2": float(t2),
                            "defect": float(defect)})
    return CheckReport("geodesic-distance-convexity", "PASS" if worst >= -tol else "FAIL", float(worst), tol,
                       bad, details={"pairs": done, "min_defect": float(worst)})


# ---------------------------------------------------------------------------
# majorization


def _cycle_arclength(pts_dist, m):
    return np.array([pts_dist(i, (i + 1) % m) for i in range(m)])


def majorization_check(Y: LengthSpace, X, P, gamma_prime: Sequence[int] | None = None, gamma=None,
                       n_pairs: int = 500, tol: float = 0.0, seed: int = 0) -> CheckReport:
    """Is ``P: Y -> X`` a majorization of the curve ``gamma``?

    ``X`` is a :class:`LengthSpace` (``P`` maps vertices to vertices, ``gamma``
    is a vertex cycle) or a :class:`TargetSpace` (``P`` gives a target point
    per vertex, ``gamma`` is an (m, 2) array of curve samples). Checks
    (a) ``d_X(P a, P b) <= d_Y(a, b) + tol`` on sampled pairs, (b) each
    boundary segment of ``gamma_prime`` has the same length as the arc of
    ``gamma`` between the images, within ``tol``, and (c) ``P`` sends
    ``gamma_prime`` injectively into ``gamma`` with cyclic order preserved,
    winding once.
    """
    gp = np.asarray(Y.boundary if gamma_prime is None else gamma_prime, dtype=np.int64)
    rng = np.random.default_rng(seed)
    if isinstance(X, LengthSpace):
        Pm = np.asarray(P, dtype=np.int64)
        curve = np.asarray(X.boundary if gamma is None else gamma, dtype=np.int64)

        def dX(i, j):
            return np.array([X.row(int(a))[int(b)] for a, b in zip(np.atleast_1d(i), np.atleast_1d(j))])

        lookup = {int(v): k for k, v in enumerate(curve)}
        pos = np.array([lookup.get(int(Pm[v]), -1) for v in gp])
        curve_d = lambda i, j: float(X.row(int(curve[i]))[int(curve[j])])  # noqa: E731
    else:
        target: TargetSpace = X
        Pm = target.validate(P)
        curve = target.validate(gamma)

        def dX(i, j):
            return target.distance(Pm[np.atleast_1d(i)], Pm[np.atleast_1d(j)])

        img = Pm[gp]
        diff = np.abs(img[:, None, :] - curve[None, :, :]).max(axis=2)
        hit = diff <= 1e-12
        pos = np.where(hit.any(axis=1), np.argmax(hit, axis=1), -1)
        curve_d = lambda i, j: float(target.distance(curve[i], curve[j]))  # noqa: E731
    if np.any(pos < 0):
        k = int(np.flatnonzero(pos < 0)[0])
        raise MajorizationError(f"boundary vertex {int(gp[k])} is not mapped onto the curve")
    m = len(curve)
    failures: list[dict[str, Any]] = []
    # arithmetic slack so that tol = 0 accepts an exact identity
    eps = 1e-12 * max(1.0, float(np.max(Y.weights)) * Y.n ** 0.5)

    # (a) shortness
    src = rng.choice(Y.n, size=min(Y.n, max(1, n_pairs // 25)), replace=False)
    worst_a = -math.inf
    for s in src:
        row = Y.row(int(s))
        tg = rng.choice(Y.n, size=25)
        excess = dX(np.full(len(tg), s), tg) - row[tg]
        k = int(np.argmax(excess))
        worst_a = max(worst_a, float(excess[k]))
        if excess[k] > tol + eps:
            failures.append({"condition": "short", "pair": [int(s), int(tg[k])], "excess": float(excess[k])})

    # (c) injective, cyclically monotone, winding once
    steps = np.mod(np.diff(np.append(pos, pos[0])), m)
    orient = 1
    if len(set(pos.tolist())) != len(pos):
        failures.append({"condition": "bijective", "reason": "two boundary vertices share an image"})
    elif steps.sum() != m:
        rev = np.mod(-np.diff(np.append(pos, pos[0])), m)
        if rev.sum() == m:
            orient = -1
            steps = rev
        else:
            failures.append({"condition": "bijective", "reason": "boundary image is not cyclically monotone"})

    # (b) arc length per boundary segment
    seg = _cycle_arclength(lambda i, j: float(Y.row(int(gp[i]))[int(gp[j])]), len(gp))
    curve_seg = _cycle_arclength(lambda i, j: curve_d(i, j), m)
    if orient < 0:
        curve_seg = np.roll(curve_seg[::-1], -1)
        pos_o = np.mod(-pos, m)
    else:
        pos_o = pos
    cum = np.concatenate([[0.0], np.cumsum(curve_seg)])
    arcs = np.empty(len(gp))
    for i in range(len(gp)):
        a, b = int(pos_o[i]), int(pos_o[(i + 1) % len(gp)])
        arcs[i] = cum[b] - cum[a] if b > a else cum[m] - cum[a] + cum[b]
    gap = np.abs(arcs - seg)
    worst_b = float(gap.max())
    if worst_b > tol + 1e-12 * max(1.0, float(seg.sum())):
        k = int(np.argmax(gap))
        failures.append({"condition": "arc-length", "segment": k, "boundary": float(seg[k]), "curve": float(arcs[k])})
    stat = max(worst_a, worst_b)
    details = {"max_short_excess": worst_a, "max_arc_gap": worst_b,
               "boundary_length": float(seg.sum()), "curve_length": float(curve_seg.sum()),
               "orientation": orient}
    return CheckReport("majorization", "PASS" if not failures else "FAIL", stat, tol, failures, details=details)
