"""Flat triangulation utilities: disc charts, cotangent weights, vertex areas."""

from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.spatial import Delaunay, cKDTree

SQRT3_2 = np.sqrt(3.0) / 2.0


def disc_chart(radius: float, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Triangular lattice clipped to a disc plus a boundary ring.

    Returns ``(points, boundary, triangles)``: the ring is the last block of
    points in counter-clockwise order, triangles are Delaunay and CCW.
    """
    n = int(np.ceil(2.0 * radius / h)) + 2
    i, j = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="ij")
    x = (i + 0.5 * j).ravel() * h
    y = j.ravel() * (SQRT3_2 * h)
    r = np.hypot(x, y)
    keep = r <= radius - 0.5 * h
    inner = np.column_stack([x[keep], y[keep]])
    m = max(6, int(np.ceil(2.0 * np.pi * radius / h)))
    th = 2.0 * np.pi * np.arange(m) / m
    ring = radius * np.column_stack([np.cos(th), np.sin(th)])
    pts = np.vstack([inner, ring])
    boundary = np.arange(len(inner), len(pts))
    tri = Delaunay(pts).simplices.astype(np.int64)
    tri = orient_ccw(pts, tri)
    return pts, boundary, tri


def estimate_disc_vertices(radius: float, h: float) -> int:
    return int(np.pi * radius * radius / (SQRT3_2 * h * h) + 2 * np.pi * radius / h)


def orient_ccw(pts: np.ndarray, tri: np.ndarray) -> np.ndarray:
    a, b, c = pts[tri[:, 0]], pts[tri[:, 1]], pts[tri[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    out = tri.copy()
    flip = cross < 0
    out[flip, 1], out[flip, 2] = tri[flip, 2], tri[flip, 1]
    return out


def neighbor_pairs(pts: np.ndarray, rnb: float) -> np.ndarray:
    return cKDTree(pts).query_pairs(rnb, output_type="ndarray").astype(np.int64)


def triangle_edges(tri: np.ndarray) -> np.ndarray:
    e = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


def triangle_angles(lengths: np.ndarray) -> np.ndarray:
    """Interior angles from side lengths; column k is opposite side k.

    ``lengths[:, k]`` is the side opposite vertex k.
    """
    a, b, c = lengths[:, 0], lengths[:, 1], lengths[:, 2]
    ca = np.clip((b * b + c * c - a * a) / (2 * b * c), -1.0, 1.0)
    cb = np.clip((a * a + c * c - b * b) / (2 * a * c), -1.0, 1.0)
    cc = np.clip((a * a + b * b - c * c) / (2 * a * b), -1.0, 1.0)
    return np.column_stack([np.arccos(ca), np.arccos(cb), np.arccos(cc)])


def side_lengths(pts: np.ndarray, tri: np.ndarray) -> np.ndarray:
    p0, p1, p2 = pts[tri[:, 0]], pts[tri[:, 1]], pts[tri[:, 2]]
    return np.column_stack([
        np.linalg.norm(p1 - p2, axis=1),
        np.linalg.norm(p2 - p0, axis=1),
        np.linalg.norm(p0 - p1, axis=1),
    ])


def heron(lengths: np.ndarray) -> np.ndarray:
    a, b, c = np.sort(lengths, axis=1)[:, ::-1].T
    # Kahan's stable form, a >= b >= c
    q = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    return 0.25 * np.sqrt(np.maximum(q, 0.0))


class Triangulation:
    """Cotangent weights and barycentric areas of a flat triangulation.

    ``weights[e]`` is ``(cot alpha + cot beta) / 2`` for edge ``edges[e]``,
    so that ``sum_e weights[e] * |u_a - u_b|^2`` is the Dirichlet energy of
    the piecewise-linear interpolant.
    """

    def __init__(self, pts: np.ndarray, tri: np.ndarray, n: int | None = None):
        self.pts = np.asarray(pts, dtype=float)
        self.tri = np.asarray(tri, dtype=np.int64)
        self.n = len(self.pts) if n is None else n
        lengths = side_lengths(self.pts, self.tri)
        self.tri_area = heron(lengths)
        ang = triangle_angles(lengths)
        cot = 1.0 / np.tan(ang)
        # edge opposite vertex k joins the other two
        ei = np.concatenate([self.tri[:, 1], self.tri[:, 2], self.tri[:, 0]])
        ej = np.concatenate([self.tri[:, 2], self.tri[:, 0], self.tri[:, 1]])
        cw = 0.5 * np.concatenate([cot[:, 0], cot[:, 1], cot[:, 2]])
        lo, hi = np.minimum(ei, ej), np.maximum(ei, ej)
        key = lo * self.n + hi
        uniq, inv = np.unique(key, return_inverse=True)
        self.edges = np.column_stack([uniq // self.n, uniq % self.n]).astype(np.int64)
        self.weights = np.bincount(inv, weights=cw, minlength=len(uniq))
        self.vertex_area = np.bincount(self.tri.ravel(), weights=np.repeat(self.tri_area / 3.0, 3),
                                       minlength=self.n)

    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric CSR of cotangent weights."""
        i, j = self.edges[:, 0], self.edges[:, 1]
        g = coo_matrix((np.concatenate([self.weights, self.weights]),
                        (np.concatenate([i, j]), np.concatenate([j, i]))),
                       shape=(self.n, self.n)).tocsr()
        g.sort_indices()
        return g.indptr.astype(np.int64), g.indices.astype(np.int64), g.data.astype(float)

    def laplacian_matrix(self):
        """Sparse ``L`` with ``(L f)_v = sum_b c_vb (f_b - f_v)``."""
        i, j = self.edges[:, 0], self.edges[:, 1]
        w = self.weights
        rows = np.concatenate([i, j, i, j])
        cols = np.concatenate([j, i, i, j])
        vals = np.concatenate([w, w, -w, -w])
        return coo_matrix((vals, (rows, cols)), shape=(self.n, self.n)).tocsr()
