"""Finite length spaces: weighted graphs, shortest-path distances, geodesics."""

from __future__ import annotations

import json
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels as K

#: absolute comparison tolerance for lengths
ATOL = 1e-9
#: relative tolerance when matching predecessors along shortest paths
TIE_RTOL = 1e-12
#: all-pairs matrices are built only up to this many vertices
APSP_LIMIT = 8000


class SpaceError(ValueError):
    """Invalid space construction or query."""


@dataclass(frozen=True)
class Oracle:
    """Tag for a model space with a closed-form metric."""

    kind: str  # euclidean | hyperbolic | cone | tree
    total_angle: float | None = None
    legs: tuple[float, ...] | None = None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.total_angle is not None:
            out["total_angle"] = self.total_angle
        if self.legs is not None:
            out["legs"] = list(self.legs)
        return out

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Oracle":
        kind = data["kind"]
        if kind not in ("euclidean", "hyperbolic", "cone", "tree"):
            raise SpaceError(f"unknown oracle kind {kind!r}")
        legs = data.get("legs")
        return cls(kind, data.get("total_angle"), tuple(legs) if legs is not None else None)


class LengthSpace:
    """Connected weighted graph standing in for a length space.

    Vertices ``0..n-1``; ``edges`` is an (m, 2) array with ``i < j`` and
    strictly positive ``weights``. Optional: chart ``coords`` (n, 2), an
    ``oracle`` tag, a cyclic ``boundary`` vertex list, ``triangles`` (t, 3)
    of a flat triangulation using a subset of the edges, and the mesh
    ``spacing`` h. Immutable after construction.
    """

    def __init__(self, n, edges, weights, coords=None, oracle=None, boundary=None,
                 triangles=None, spacing=None, labels=None):
        self.n = int(n)
        self.edges = _frozen(np.asarray(edges, dtype=np.int64).reshape(-1, 2))
        self.weights = _frozen(np.asarray(weights, dtype=np.float64).ravel())
        self.coords = None if coords is None else _frozen(np.asarray(coords, dtype=np.float64))
        self.oracle = oracle
        self.boundary = None if boundary is None else _frozen(np.asarray(boundary, dtype=np.int64))
        self.triangles = None if triangles is None else _frozen(np.asarray(triangles, dtype=np.int64))
        self.spacing = None if spacing is None else float(spacing)
        self.labels = dict(labels or {})
        self._csr = None
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self._apsp = None

    # -- structure ---------------------------------------------------------

    @property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self._csr is None:
            i, j = self.edges[:, 0], self.edges[:, 1]
            g = coo_matrix(
                (np.concatenate([self.weights, self.weights]),
                 (np.concatenate([i, j]), np.concatenate([j, i]))),
                shape=(self.n, self.n),
            ).tocsr()
            g.sort_indices()
            self._csr = (g.indptr.astype(np.int64), g.indices.astype(np.int64), g.data.astype(np.float64))
        return self._csr

    @property
    def num_edges(self) -> int:
        return len(self.weights)

    def edge_lookup(self) -> dict[tuple[int, int], float]:
        return {(int(a), int(b)): float(w) for (a, b), w in zip(self.edges, self.weights)}

    def neighbors(self, v: int) -> np.ndarray:
        indptr, indices, _ = self.csr
        return indices[indptr[v]:indptr[v + 1]]

    def is_interior(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        if self.boundary is not None:
            mask[self.boundary] = False
        return mask

    def with_weights(self, weights, oracle=None, labels=None, spacing=None) -> "LengthSpace":
        """Same combinatorics and chart, new edge weights (and optionally a new spacing label)."""
        return LengthSpace(self.n, self.edges, weights, self.coords, oracle, self.boundary,
                           self.triangles, self.spacing if spacing is None else spacing,
                           labels if labels is not None else self.labels)

    # -- distances ---------------------------------------------------------

    def row(self, a: int) -> np.ndarray:
        """Shortest path lengths from ``a`` to every vertex (cached)."""
        a = self._check_vertex(a)
        if self._apsp is not None:
            return self._apsp[a]
        hit = self._rows.get(a)
        if hit is not None:
            self._rows.move_to_end(a)
            return hit
        out = np.empty(self.n)
        K.dijkstra_into(*self.csr, a, out)
        out.setflags(write=False)
        self._rows[a] = out
        budget = max(8, int(2e8 // (8 * max(self.n, 1))))
        while len(self._rows) > budget:
            self._rows.popitem(last=False)
        return out

    def rows(self, sources: Sequence[int]) -> np.ndarray:
        src = np.asarray([self._check_vertex(s) for s in sources], dtype=np.int64)
        if self._apsp is not None:
            return self._apsp[src]
        out = np.empty((len(src), self.n))
        K.multi_source(*self.csr, src, out)
        return out

    def all_pairs(self) -> np.ndarray:
        """Dense distance matrix; rows come from the same Dijkstra as ``row``."""
        if self._apsp is None:
            if self.n > APSP_LIMIT:
                raise SpaceError(
                    f"all-pairs distances need n <= {APSP_LIMIT} vertices, got {self.n}; coarsen h")
            out = np.empty((self.n, self.n))
            K.multi_source(*self.csr, np.arange(self.n, dtype=np.int64), out)
            out.setflags(write=False)
            self._apsp = out
            self._rows.clear()
        return self._apsp

    def _check_vertex(self, v) -> int:
        iv = int(v)
        if iv != v or not 0 <= iv < self.n:
            raise SpaceError(f"invalid vertex {v!r} for a space with {self.n} vertices")
        return iv

    def __repr__(self) -> str:
        tag = self.oracle.kind if self.oracle else None
        return f"LengthSpace(n={self.n}, edges={self.num_edges}, oracle={tag})"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GeodesicPath:
    """Shortest path with its arc-length parametrization."""

    vertices: np.ndarray
    cumulative: np.ndarray
    total: float
    space: LengthSpace = field(repr=False, compare=False)

    def _locate(self, t: float) -> tuple[int, float]:
        if not -ATOL <= t <= self.total + ATOL:
            raise SpaceError(f"parameter {t} outside [0, {self.total}]")
        if len(self.vertices) == 1:
            return 0, 0.0
        t = min(max(t, 0.0), self.total)
        k = int(np.searchsorted(self.cumulative, t, side="right")) - 1
        k = min(max(k, 0), len(self.vertices) - 2)
        return k, float(t - self.cumulative[k])

    def point_at(self, t: float) -> tuple[int, int, float]:
        """Edge ``(u, v)`` and offset from ``u`` of the point at arc length ``t``."""
        k, off = self._locate(t)
        if len(self.vertices) == 1:
            v = int(self.vertices[0])
            return v, v, 0.0
        return int(self.vertices[k]), int(self.vertices[k + 1]), off

    def interpolate(self, values: np.ndarray, t: float) -> float | np.ndarray:
        """Vertex data linearly interpolated in arc length at parameter ``t``."""
        k, off = self._locate(t)
        if len(self.vertices) == 1:
            return values[self.vertices[0]]
        w = self.cumulative[k + 1] - self.cumulative[k]
        s = off / w if w > 0 else 0.0
        return (1 - s) * values[self.vertices[k]] + s * values[self.vertices[k + 1]]

    def coords_at(self, t: float) -> np.ndarray:
        if self.space.coords is None:
            raise SpaceError("space has no coordinates")
        return np.asarray(self.interpolate(self.space.coords, t), dtype=float)


# ---------------------------------------------------------------------------
# operations


def build_space(n, edges, coords=None, boundary=None, *, oracle=None, triangles=None,
                spacing=None, labels=None) -> LengthSpace:
    """Validate and assemble a :class:`LengthSpace`.

    ``edges`` is a sequence of ``(i, j, w)``. Parallel edges keep the
    smallest weight; self-loops are rejected.
    """
    n = int(n)
    if n <= 0:
        raise SpaceError("a space needs at least one vertex")
    arr = np.asarray(edges, dtype=np.float64).reshape(-1, 3)
    ij = arr[:, :2]
    if not np.all(ij == np.round(ij)):
        raise SpaceError("edge endpoints must be integers")
    ij = ij.astype(np.int64)
    w = arr[:, 2]
    if np.any((ij < 0) | (ij >= n)):
        raise SpaceError("edge endpoint out of range")
    if np.any(ij[:, 0] == ij[:, 1]):
        raise SpaceError("self-loop edge")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise SpaceError("edge weights must be positive and finite")
    ij.sort(axis=1)
    key = ij[:, 0] * n + ij[:, 1]
    order = np.lexsort((w, key))
    key, ij, w = key[order], ij[order], w[order]
    keep = np.ones(len(w), dtype=bool)
    keep[1:] = key[1:] != key[:-1]
    key, ij, w = key[keep], ij[keep], w[keep]
    if n > 1:
        g = coo_matrix((np.ones(len(w)), (ij[:, 0], ij[:, 1])), shape=(n, n))
        ncomp, _ = connected_components(g, directed=False)
        if ncomp != 1:
            raise SpaceError(f"graph is disconnected ({ncomp} components)")
    if coords is not None:
        coords = np.asarray(coords, dtype=np.float64)
        if coords.shape != (n, 2):
            raise SpaceError(f"coords must have shape ({n}, 2)")
    if boundary is not None:
        boundary = np.asarray(boundary, dtype=np.int64)
        _check_cycle(boundary, n, key)
    return LengthSpace(n, ij, w, coords, oracle, boundary, triangles, spacing, labels)


def _check_cycle(cycle: np.ndarray, n: int, edge_keys: np.ndarray) -> None:
    if len(cycle) < 3:
        raise SpaceError("boundary cycle needs at least three vertices")
    if np.any((cycle < 0) | (cycle >= n)):
        raise SpaceError("boundary vertex out of range")
    if len(np.unique(cycle)) != len(cycle):
        raise SpaceError("boundary cycle repeats a vertex")
    nxt = np.roll(cycle, -1)
    want = np.minimum(cycle, nxt) * n + np.maximum(cycle, nxt)
    pos = np.searchsorted(edge_keys, want)
    found = (pos < len(edge_keys)) & (edge_keys[np.minimum(pos, len(edge_keys) - 1)] == want)
    if not np.all(found):
        k = int(np.argmin(found))
        raise SpaceError(f"boundary vertices {cycle[k]} and {nxt[k]} are not adjacent")


def distance(space: LengthSpace, a: int, b: int) -> float:
    """Graph shortest-path length between vertices ``a`` and ``b``."""
    b = space._check_vertex(b)
    return float(space.row(a)[b])


def geodesic(space: LengthSpace, a: int, b: int) -> GeodesicPath:
    """Shortest path with deterministic tie-breaking.

    Traced backwards from ``b``: each predecessor is the smallest-index
    neighbour that lies on some shortest path.
    """
    row = space.row(a)
    b = space._check_vertex(b)
    buf = np.empty(space.n, dtype=np.int64)
    cnt = K.walk_geodesic(*space.csr, row, int(a), b, TIE_RTOL, buf)
    if cnt < 0:
        raise SpaceError(f"could not trace a shortest path {a} -> {b}")
    verts = buf[:cnt].copy()
    cum = np.asarray(row)[verts].copy()
    return GeodesicPath(verts, cum, float(row[b]), space)


def curve_length(space: LengthSpace, polyline: Sequence[int]) -> float:
    """Sum of edge weights along consecutive adjacent vertices."""
    pts = [space._check_vertex(v) for v in polyline]
    lookup = space.edge_lookup()
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        w = lookup.get((min(a, b), max(a, b)))
        if w is None:
            raise SpaceError(f"vertices {a} and {b} are not adjacent")
        total += w
    return total


# ---------------------------------------------------------------------------
# serialization


def space_to_json(space: LengthSpace) -> dict[str, Any]:
    out: dict[str, Any] = {
        "vertices": space.n,
        "edges": [[int(a), int(b), float(w)] for (a, b), w in zip(space.edges, space.weights)],
    }
    if space.coords is not None:
        out["coords"] = space.coords.tolist()
    if space.boundary is not None:
        out["boundary"] = space.boundary.tolist()
    if space.oracle is not None:
        out["oracle"] = space.oracle.to_json()
    if space.triangles is not None:
        out["triangles"] = space.triangles.tolist()
    if space.spacing is not None:
        out["spacing"] = space.spacing
    if space.labels:
        out["labels"] = space.labels
    return out


def space_from_json(data: dict[str, Any]) -> LengthSpace:
    try:
        n = data["vertices"]
        edges = data["edges"]
    except KeyError as exc:
        raise SpaceError(f"space JSON is missing field {exc.args[0]!r}") from None
    oracle = Oracle.from_json(data["oracle"]) if data.get("oracle") else None
    return build_space(n, edges, data.get("coords"), data.get("boundary"), oracle=oracle,
                       triangles=data.get("triangles"), spacing=data.get("spacing"),
                       labels=data.get("labels"))


def save_space(space: LengthSpace, path: str | Path) -> None:
    Path(path).write_text(json.dumps(space_to_json(space)))


def load_space(path: str | Path) -> LengthSpace:
    return space_from_json(json.loads(Path(path).read_text()))
