"""Discrete harmonic maps and minimal discs into CAT(0) targets.

Energy is the cotangent-weighted sum of squared target distances over the
edges of a flat disc triangulation. Dirichlet problems are solved by
repeatedly moving interior vertices to the weighted barycenter of their
neighbours' images: Gauss-Seidel (in-place, the default) or Jacobi (every
update reads the previous sweep).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.sparse import coo_matrix

from . import _kernels as K
from .fields import (
    CheckReport, FieldError, Rule, ScalarField, evaluate, laplacian_values, log_subharmonic_check, triangulation,
)
from .metric import LengthSpace, SpaceError
from .models import oracle_distance
from .targets import TargetSpace

FLOOR = 1e-9
ROUND_TOL = 1e-7


class ConvergenceError(RuntimeError):
    """An iteration hit its cap; ``partial`` holds the last state."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class SpaceMap:
    """Target point per domain vertex."""

    domain: LengthSpace
    target: TargetSpace
    assignment: np.ndarray

    def __post_init__(self):
        self.assignment = self.target.validate(self.assignment)
        if len(self.assignment) != self.domain.n:
            raise SpaceError("assignment needs one target point per domain vertex")

    def boundary_values(self) -> np.ndarray:
        return self.assignment[self.domain.boundary]

    def to_json(self) -> dict[str, Any]:
        return {"target": self.target.to_json(), "assignment": self.assignment.tolist()}


@dataclass
class EnergyReport:
    energy: float
    density: np.ndarray = field(repr=False)
    history: list[float] = field(default_factory=list)
    sweeps: int = 0
    converged: bool = True
    monotone: bool = True
    mode: str = "gauss-seidel"

    def to_dict(self) -> dict[str, Any]:
        return {"energy": self.energy, "sweeps": self.sweeps, "converged": self.converged,
                "monotone": self.monotone, "mode": self.mode,
                "history_head": self.history[:5], "history_tail": self.history[-5:]}


# ---------------------------------------------------------------------------
# energy


def _require_disc(domain: LengthSpace) -> None:
    if domain.oracle is None or domain.oracle.kind != "euclidean" or domain.triangles is None \
            or domain.boundary is None:
        raise SpaceError("domain must be a flat triangulated disc with a boundary cycle")


def _edge_energy(domain, target, pts):
    tri = triangulation(domain)
    a, b = tri.edges[:, 0], tri.edges[:, 1]
    d = target.distance(pts[a], pts[b])
    return tri, tri.weights * d * d


def ks_energy(m: SpaceMap) -> EnergyReport:
    """Sum over edges of ``c(a, b) * d(u(a), u(b))**2``.

    For maps into the Euclidean plane this is the Dirichlet energy of the
    piecewise-linear interpolant; the identity of a disc has energy twice its
    area. Density at a vertex is half its incident edge terms over its area.
    """
    _require_disc(m.domain)
    tri, terms = _edge_energy(m.domain, m.target, m.assignment)
    per_vertex = 0.5 * (np.bincount(tri.edges[:, 0], weights=terms, minlength=m.domain.n)
                        + np.bincount(tri.edges[:, 1], weights=terms, minlength=m.domain.n))
    density = per_vertex / tri.vertex_area
    e = float(terms.sum())
    return EnergyReport(e, density, [e])


def _interior_csr(domain: LengthSpace):
    tri = triangulation(domain)
    cache = domain.__dict__.setdefault("_cache", {})
    if "sweep_csr" not in cache:
        i, j = tri.edges[:, 0], tri.edges[:, 1]
        w = np.maximum(tri.weights, 0.0)
        g = coo_matrix((np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
                       shape=(domain.n, domain.n)).tocsr()
        g.sort_indices()
        cache["sweep_csr"] = (g.indptr.astype(np.int64), g.indices.astype(np.int64), g.data.astype(float))
    return cache["sweep_csr"]


def _energy_value(domain, target, pts) -> float:
    if target.kind == "mesh":
        return float(_edge_energy(domain, target, pts)[1].sum())
    tri = triangulation(domain)
    return float(K.edge_energy(target.kernel_kind, tri.edges[:, 0], tri.edges[:, 1], tri.weights, pts))


# ---------------------------------------------------------------------------
# Dirichlet problem


def solve_dirichlet(domain: LengthSpace, target: TargetSpace, boundary_data, tol: float = 1e-10,
                    max_sweeps: int = 20000, mode: str = "gauss-seidel", init=None, order=None,
                    raise_on_cap: bool = True, error_estimate: bool = True) -> tuple[SpaceMap, EnergyReport]:
    """Harmonic map with prescribed boundary values.

    ``boundary_data`` lists a target point per vertex of ``domain.boundary``
    (same order). Interior vertices start at the barycenter of all boundary
    points unless ``init`` gives a full assignment. Stops when the largest
    displacement in a sweep is at most ``tol`` and, with ``error_estimate``
    on, also the geometric tail ``disp * rho / (1 - rho)`` is, where ``rho``
    is the worst recent ratio of successive displacements. The tail bounds
    the remaining distance to the fixed point for a linear contraction, so
    runs with different sweep orders end within a few ``tol`` of each other.
    Raises :class:`ConvergenceError` after ``max_sweeps``.
    """
    _require_disc(domain)
    if mode not in ("gauss-seidel", "jacobi"):
        raise SpaceError(f"unknown sweep mode {mode!r}")
    if target.kind == "mesh":
        return _solve_mesh(domain, target, boundary_data, max_sweeps)
    bdata = target.validate(boundary_data)
    if len(bdata) != len(domain.boundary):
        raise SpaceError("boundary data needs one point per boundary vertex")
    interior = np.flatnonzero(domain.is_interior())
    if init is None:
        pts = np.empty((domain.n, 2))
        pts[:] = target.barycenter(bdata, np.ones(len(bdata)))
    else:
        pts = np.array(target.validate(init), dtype=float)
    pts[domain.boundary] = bdata
    order = interior if order is None else np.asarray(order, dtype=np.int64)
    ptr, idx, wts = _interior_csr(domain)
    kind = target.kernel_kind
    history = [_energy_value(domain, target, pts)]
    monotone = True
    jac = mode == "jacobi"
    nxt = pts.copy() if jac else pts
    sweeps = 0
    converged = False
    ratios: list[float] = []
    prev = math.inf
    while sweeps < max_sweeps:
        disp = K.relax_sweep(kind, ptr, idx, wts, order, pts, nxt, 1e-13)
        if prev < math.inf and prev > 0:
            ratios = (ratios + [disp / prev])[-10:]
        prev = disp
        sweeps += 1
        if jac:
            pts, nxt = nxt, pts
            nxt[:] = pts
        e = _energy_value(domain, target, pts)
        if e > history[-1] + 1e-12 * max(1.0, history[-1]):
            monotone = False
        history.append(e)
        if disp <= tol:
            if not error_estimate or disp == 0.0:
                converged = True
                break
            rho = min(max(ratios, default=1.0), 1.0 - 1e-9)
            if len(ratios) >= 10 and disp * rho / (1.0 - rho) <= tol:
                converged = True
                break
    m = SpaceMap(domain, target, pts)
    rep = ks_energy(m)
    rep.history, rep.sweeps, rep.converged, rep.monotone, rep.mode = history, sweeps, converged, monotone, mode
    if not converged and raise_on_cap:
        raise ConvergenceError(f"Dirichlet sweeps did not reach tol={tol} within {max_sweeps} sweeps",
                               partial=(m, rep))
    return m, rep


def _solve_mesh(domain, target, boundary_data, max_sweeps):
    # vertex-valued targets: discrete barycenters, stop when nothing moves
    bdata = target.validate(boundary_data)
    pts = np.empty((domain.n, 2))
    pts[:] = target.barycenter(bdata, np.ones(len(bdata)))
    pts[domain.boundary] = bdata
    ptr, idx, wts = _interior_csr(domain)
    history = [_energy_value(domain, target, pts)]
    interior = np.flatnonzero(domain.is_interior())
    for sweep in range(1, max_sweeps + 1):
        moved = 0
        for v in interior:
            nb = idx[ptr[v]:ptr[v + 1]]
            new = target.barycenter(pts[nb], wts[ptr[v]:ptr[v + 1]])
            if new[0] != pts[v, 0]:
                moved += 1
                pts[v] = new
        history.append(_energy_value(domain, target, pts))
        if moved == 0:
            m = SpaceMap(domain, target, pts)
            rep = ks_energy(m)
            rep.history, rep.sweeps = history, sweep
            rep.monotone = all(b <= a + 1e-12 for a, b in zip(history, history[1:]))
            return m, rep
    raise ConvergenceError("mesh-target sweeps did not settle", partial=SpaceMap(domain, target, pts))


# ---------------------------------------------------------------------------
# Fuglede pullback test


def rule_on_target(target: TargetSpace, rule, pts) -> np.ndarray:
    """Evaluate a field rule at target points."""
    rule = Rule.from_json(rule)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if target.kind == "mesh":
        from .fields import make_field

        return make_field(target.space, rule).values[pts[:, 0].astype(int)]
    oracle = target.oracle
    return evaluate(rule, target.chart(pts), lambda P, q: oracle_distance(oracle, P, q),
                    lambda v: (_ for _ in ()).throw(FieldError("target rules take points, not vertices")))


CONVEX_LIBRARY: dict[str, list[dict[str, Any]]] = {
    "euclidean-plane": [
        {"kind": "affine", "a": 1.0, "b": -0.5, "c": 0.2},
        {"kind": "norm-squared"},
        {"kind": "distance-to-point", "point": [0.3, -0.2]},
        {"kind": "distance-to-point", "point": [-0.1, 0.4], "power": 2},
        {"kind": "exp", "of": {"kind": "affine", "a": 0.5, "b": 0.5}},
    ],
    "hyperbolic-plane": [
        {"kind": "distance-to-point", "point": [0.0, 0.0]},
        {"kind": "distance-to-point", "point": [0.2, -0.1], "power": 2},
        {"kind": "exp", "of": {"kind": "distance-to-point", "point": [-0.3, 0.1]}},
    ],
    "tree": [
        {"kind": "distance-to-point", "point": [0.0, 0.0]},
        {"kind": "distance-to-point", "point": [0.5, 0.0], "power": 2},
        {"kind": "exp", "of": {"kind": "distance-to-point", "point": [0.3, 0.0]}},
    ],
}


def pullback_subharmonicity_test(m: SpaceMap, rule, tol: float | None = None) -> CheckReport:
    """PASS iff the discrete Laplacian of ``f o u`` is >= -tol at every interior vertex."""
    rule = Rule.from_json(rule)
    h = m.domain.spacing or 0.0
    tol = 5.0 * h if tol is None else tol
    vals = rule_on_target(m.target, rule, m.assignment)
    lap = laplacian_values(m.domain, vals)
    interior = np.flatnonzero(m.domain.is_interior())
    li = lap[interior]
    worst = float(li.min())
    bad = [{"vertex": int(v), "laplacian": float(x)} for v, x in zip(interior, li) if x < -tol]
    return CheckReport("pullback-subharmonic", "PASS" if worst >= -tol else "FAIL", worst, tol, bad,
                       details={"rule": rule.to_json(), "min_laplacian": worst})


# ---------------------------------------------------------------------------
# Plateau problem


def _segments_cross(p, q, r, s) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) <= 1e-14 else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return min(a[0], b[0]) - 1e-14 <= c[0] <= max(a[0], b[0]) + 1e-14 and \
            min(a[1], b[1]) - 1e-14 <= c[1] <= max(a[1], b[1]) + 1e-14

    o1, o2, o3, o4 = orient(p, q, r), orient(p, q, s), orient(r, s, p), orient(r, s, q)
    if o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4):
        return True
    return (o1 == 0 and on_seg(p, q, r)) or (o2 == 0 and on_seg(p, q, s)) or \
        (o3 == 0 and on_seg(r, s, p)) or (o4 == 0 and on_seg(r, s, q))


def check_jordan(target: TargetSpace, gamma: np.ndarray) -> None:
    """Reject repeated samples and self-intersecting closed polylines (in the chart)."""
    m = len(gamma)
    if m < 3:
        raise SpaceError("a closed curve needs at least three samples")
    z = target.chart(gamma)
    key = np.round(z, 12)
    if len(np.unique(key, axis=0)) != m:
        raise SpaceError("curve samples repeat a point; not a Jordan curve")
    nxt = np.roll(z, -1, axis=0)
    for i in range(m):
        for j in range(i + 2, m):
            if i == 0 and j == m - 1:
                continue
            if _segments_cross(z[i], nxt[i], z[j], nxt[j]):
                raise SpaceError(f"curve segments {i} and {j} intersect; not a Jordan curve")


@dataclass
class PlateauResult:
    map: SpaceMap
    energy: EnergyReport
    samples: np.ndarray
    positions: np.ndarray  # sample index per boundary vertex
    pins: tuple[tuple[int, int], ...]
    outer_energies: list[float]
    outer_iterations: int
    moves: int
    reversed_curve: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {"energy": self.energy.energy, "outer_iterations": self.outer_iterations,
                "outer_energies": self.outer_energies, "moves": self.moves,
                "positions": self.positions.tolist(), "pins": [list(p) for p in self.pins],
                "reversed_curve": self.reversed_curve}


def cyclically_monotone(pos: np.ndarray, m: int) -> bool:
    steps = np.mod(np.diff(np.append(pos, pos[0])), m)
    return bool(np.all(steps > 0) and steps.sum() == m)


def _signed_area(z: np.ndarray) -> float:
    x, y = z[:, 0], z[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _boundary_moves(target, gamma, pos, free, pts, bverts, ptr, idx, wts, m) -> int:
    """Single-sample moves of free boundary vertices that lower their local energy."""
    nb = len(pos)
    moves = 0
    improved = True
    while improved:
        improved = False
        for k in np.flatnonzero(free):
            v = bverts[k]
            nbrs = idx[ptr[v]:ptr[v + 1]]
            c = wts[ptr[v]:ptr[v + 1]]
            near = pts[nbrs]

            def local(p):
                d = target.distance(np.broadcast_to(p, near.shape), near)
                return float(np.sum(c * d * d))

            cur = local(pts[v])
            lo = pos[(k - 1) % nb]
            hi = pos[(k + 1) % nb]
            for step in (1, -1):
                cand = (pos[k] + step) % m
                # stay strictly between the neighbours' samples (cyclically)
                if (cand - lo) % m == 0 or (hi - cand) % m == 0:
                    continue
                if (cand - lo) % m >= (hi - lo) % m and nb > 1:
                    continue
                e_new = local(gamma[cand])
                if e_new < cur - 1e-15:
                    pos[k] = cand
                    pts[v] = gamma[cand]
                    cur = e_new
                    moves += 1
                    improved = True
                    break
    return moves


def solve_plateau(domain: LengthSpace, target: TargetSpace, gamma, tol: float = 1e-9, max_outer: int = 200,
                  dirichlet_tol: float = 1e-10, max_sweeps: int = 50000,
                  mode: str = "gauss-seidel") -> PlateauResult:
    """Least-energy disc spanning the sampled Jordan curve ``gamma``.

    Alternates a Dirichlet solve with single-sample moves of boundary vertices
    along ``gamma`` that lower the energy and keep the assignment strictly
    cyclically monotone. Boundary vertices 0, nB/3 and 2nB/3 stay pinned to
    samples 0, m/3 and 2m/3. Stops when an outer round improves the energy by
    less than ``tol``.
    """
    _require_disc(domain)
    gamma = target.validate(gamma)
    nb = len(domain.boundary)
    m = len(gamma)
    if m < nb:
        raise SpaceError(f"curve needs at least as many samples ({m}) as boundary vertices ({nb})")
    check_jordan(target, gamma)
    flipped = False
    if target.kind in ("euclidean-plane", "hyperbolic-plane") and _signed_area(target.chart(gamma)) < 0:
        gamma = gamma[::-1].copy()
        flipped = True
    pos = np.floor(np.arange(nb) * m / nb + 1e-9).astype(np.int64)
    pinned_b = (0, nb // 3, (2 * nb) // 3)
    pins = tuple((b, int(pos[b])) for b in pinned_b)
    free = np.ones(nb, dtype=bool)
    free[list(pinned_b)] = False
    tri = triangulation(domain)
    ptr, idx, wts = tri.adjacency()
    bverts = domain.boundary

    # rounds use a looser inner solve; a round that ends the alternation is
    # confirmed with a tight solve and one more pass of moves
    loose = max(dirichlet_tol, ROUND_TOL)
    m_map, rep = solve_dirichlet(domain, target, gamma[pos], loose, max_sweeps, mode)
    outer = [rep.energy]
    moves_total = 0
    tight = loose == dirichlet_tol
    it = 0
    for it in range(1, max_outer + 1):
        pts = m_map.assignment.copy()
        moves = _boundary_moves(target, gamma, pos, free, pts, bverts, ptr, idx, wts, m)
        if not cyclically_monotone(pos, m):  # pragma: no cover - guarded by construction
            raise SpaceError("boundary assignment lost cyclic monotonicity")
        moves_total += moves
        if moves == 0 and tight:
            outer.append(rep.energy)
            break
        m_map, rep = solve_dirichlet(domain, target, gamma[pos], dirichlet_tol if tight else loose,
                                     max_sweeps, mode, init=pts)
        outer.append(rep.energy)
        if outer[-2] - outer[-1] < tol:
            if tight:
                break
            tight = True
            m_map, rep = solve_dirichlet(domain, target, gamma[pos], dirichlet_tol, max_sweeps, mode,
                                         init=m_map.assignment)
            outer[-1] = rep.energy
    else:
        raise ConvergenceError(f"Plateau alternation did not settle within {max_outer} rounds")
    return PlateauResult(m_map, rep, gamma, pos.copy(), pins, outer, it, moves_total, flipped)


# ---------------------------------------------------------------------------
# conformal factor and intrinsic pullback


def conformal_factor_estimate(m: SpaceMap, exclude_radius: float | None = None,
                              zero_tol: float | None = None) -> tuple[ScalarField, CheckReport]:
    """lambda(v): mean over incident triangulation edges of d(u(a), u(b)) / |a - b|.

    Returns the field and its log-subharmonicity report. Vertices with
    ``lambda <= zero_tol`` (default 1e-12 times the largest value) form the
    vanishing locus. The Laplacian of log lambda at v reads lambda on the
    edge stars of v and its neighbours; vertices whose 2-ring meets the
    boundary are left out of the report, because the lopsided stars there
    bias the mean ratio by O(h |grad lambda|) and the Laplacian by O(1/h).
    """
    _require_disc(m.domain)
    tri = triangulation(m.domain)
    a, b = tri.edges[:, 0], tri.edges[:, 1]
    ratio = m.target.distance(m.assignment[a], m.assignment[b]) / np.linalg.norm(
        m.domain.coords[a] - m.domain.coords[b], axis=1)
    n = m.domain.n
    s = np.bincount(a, weights=ratio, minlength=n) + np.bincount(b, weights=ratio, minlength=n)
    cnt = np.bincount(a, minlength=n) + np.bincount(b, minlength=n)
    lam = s / np.maximum(cnt, 1)
    top = float(lam.max()) if len(lam) else 0.0
    zt = 1e-12 * max(top, 1e-300) if zero_tol is None else zero_tol
    fld = ScalarField(lam, positive=bool(np.all(lam > zt)), meta={"zero_tol": zt})
    if top <= zt:
        interior = np.flatnonzero(m.domain.is_interior())
        report = CheckReport("log-subharmonic", "PASS", math.inf, 0.0, [], interior.tolist(),
                             details={"degenerate": True, "note": "lambda vanishes everywhere", "tested": 0})
    else:
        on_b = np.zeros(n, dtype=bool)
        on_b[m.domain.boundary] = True
        touch = on_b.copy()
        for _ in range(2):
            grow = touch.copy()
            grow[a[touch[b]]] = True
            grow[b[touch[a]]] = True
            touch = grow
        report = log_subharmonic_check(m.domain, fld, zero_tol=zt, exclude_radius=exclude_radius,
                                       skip=touch & ~on_b)
    return fld, report


def intrinsic_pullback(domain: LengthSpace, lam: ScalarField, floor: float = FLOOR) -> LengthSpace:
    """The domain reweighted by lambda (trapezoid); edges inside the zero set get ``w * floor``.

    As with conformal changes, the spacing label becomes ``h * max factor``.
    """
    vals = np.asarray(lam.values, dtype=float)
    if np.any(vals < 0):
        raise FieldError("lambda must be non-negative")
    zt = float(lam.meta.get("zero_tol", 0.0))
    zero = vals <= zt
    a, b = domain.edges[:, 0], domain.edges[:, 1]
    q = 0.5 * (vals[a] + vals[b])
    both = zero[a] & zero[b]
    q = np.where(both | (q <= 0), floor, q)
    labels = {k: v for k, v in domain.labels.items() if k != "curvature"}
    labels["pullback"] = {"floor": floor, "floored_edges": int(both.sum()), "vanishing": int(zero.sum())}
    if np.all(vals == 1.0):
        return domain
    labels["base_spacing"] = domain.spacing
    return domain.with_weights(domain.weights * q, oracle=None, labels=labels,
                               spacing=None if domain.spacing is None else domain.spacing * float(q.max()))


__all__ = [
    "CONVEX_LIBRARY", "ConvergenceError", "EnergyReport", "PlateauResult", "SpaceMap", "check_jordan",
    "conformal_factor_estimate", "cyclically_monotone", "intrinsic_pullback", "ks_energy",
    "pullback_subharmonicity_test", "rule_on_target", "solve_dirichlet", "solve_plateau",
]
