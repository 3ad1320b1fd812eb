"""Target spaces for maps: closed-form planes and trees, or a mesh."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _kernels as K
from .metric import LengthSpace, Oracle, SpaceError, space_from_json, space_to_json
from .models import oracle_distance

KINDS = ("euclidean-plane", "hyperbolic-plane", "tree", "mesh")
_KERNEL_KIND = {"euclidean-plane": K.EUCLIDEAN, "hyperbolic-plane": K.HYPERBOLIC, "tree": K.STAR_TREE}
BARYCENTER_TOL = 1e-12


@dataclass(frozen=True)
class TargetSpace:
    """Where maps take values. Points are rows of an (n, 2) float array.

    euclidean-plane: ``(x, y)``; hyperbolic-plane: Poincare-disc ``(x, y)``;
    tree: ``(leg, t)`` on a star tree with ``legs`` (leg index, distance from
    the center); mesh: ``(vertex, 0)`` on a :class:`LengthSpace`.
    """

    kind: str
    legs: tuple[float, ...] | None = None
    space: LengthSpace | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpaceError(f"unknown target kind {self.kind!r}")
        if self.kind == "tree" and not self.legs:
            raise SpaceError("tree target needs legs")
        if self.kind == "mesh" and self.space is None:
            raise SpaceError("mesh target needs a space")

    @classmethod
    def euclidean(cls) -> "TargetSpace":
        return cls("euclidean-plane")

    @classmethod
    def hyperbolic(cls) -> "TargetSpace":
        return cls("hyperbolic-plane")

    @classmethod
    def tree(cls, legs) -> "TargetSpace":
        return cls("tree", tuple(float(x) for x in legs))

    @classmethod
    def mesh(cls, space: LengthSpace) -> "TargetSpace":
        return cls("mesh", space=space)

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "TargetSpace":
        kind = data.get("kind")
        if kind == "mesh":
            return cls.mesh(space_from_json(data["space"]))
        if kind == "tree":
            return cls.tree(data.get("legs") or ())
        return cls(kind)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.legs is not None:
            out["legs"] = list(self.legs)
        if self.kind == "mesh":
            out["space"] = space_to_json(self.space)
        return out

    # -- geometry -----------------------------------------------------------

    @property
    def oracle(self) -> Oracle | None:
        if self.kind == "euclidean-plane":
            return Oracle("euclidean")
        if self.kind == "hyperbolic-plane":
            return Oracle("hyperbolic")
        if self.kind == "tree":
            return Oracle("tree", legs=self.legs)
        return None

    def validate(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.shape[1] != 2 or not np.all(np.isfinite(pts)):
            raise SpaceError("target points must be finite (n, 2) rows")
        if self.kind == "hyperbolic-plane" and np.any(np.sum(pts ** 2, axis=1) >= 1.0):
            raise SpaceError("hyperbolic points must lie inside the unit disc")
        if self.kind == "tree":
            leg = pts[:, 0]
            if np.any(leg != np.round(leg)) or np.any((leg < 0) | (leg >= len(self.legs))):
                raise SpaceError("tree points need an integer leg index")
            if np.any(pts[:, 1] < 0) or np.any(pts[:, 1] > np.asarray(self.legs)[leg.astype(int)] + 1e-9):
                raise SpaceError("tree point outside its leg")
        if self.kind == "mesh":
            v = pts[:, 0]
            if np.any(v != np.round(v)) or np.any((v < 0) | (v >= self.space.n)):
                raise SpaceError("mesh points are vertex indices")
        return pts

    def chart(self, pts) -> np.ndarray:
        """Planar coordinates understood by :func:`conflab.models.oracle_distance`."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "tree":
            ang = 2 * math.pi * pts[:, 0] / len(self.legs)
            return np.column_stack([pts[:, 1] * np.cos(ang), pts[:, 1] * np.sin(ang)])
        if self.kind == "mesh":
            if self.space.coords is None:
                raise SpaceError("mesh target has no coordinates")
            return self.space.coords[pts[:, 0].astype(int)]
        return pts

    def from_chart(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if self.kind == "tree":
            m = len(self.legs)
            t = np.hypot(z[:, 0], z[:, 1])
            ang = np.mod(np.arctan2(z[:, 1], z[:, 0]), 2 * math.pi)
            leg = np.mod(np.rint(ang / (2 * math.pi / m)), m)
            return np.column_stack([np.where(t > 0, leg, 0.0), t])
        if self.kind == "mesh":
            tree = self.space.coords
            idx = np.argmin(np.linalg.norm(tree[None, :, :] - z[:, None, :], axis=2), axis=1)
            return np.column_stack([idx.astype(float), np.zeros(len(idx))])
        return z

    def distance(self, p, q) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.kind == "mesh":
            p2, q2 = np.broadcast_arrays(np.atleast_2d(p), np.atleast_2d(q))
            out = np.array([self.space.row(int(a))[int(b)] for a, b in zip(p2[:, 0], q2[:, 0])])
            return out.reshape(np.broadcast_shapes(p.shape, q.shape)[:-1])
        if self.kind == "tree":
            p, q = np.broadcast_arrays(p, q)
            same = (p[..., 0] == q[..., 0]) | (p[..., 1] == 0) | (q[..., 1] == 0)
            return np.where(same, np.abs(p[..., 1] - q[..., 1]), p[..., 1] + q[..., 1])
        return oracle_distance(self.oracle, p, q)

    def point_on_geodesic(self, p, q, t: float) -> np.ndarray:
        """The point at distance ``t * d(p, q)`` from ``p`` on the geodesic to ``q``."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.kind == "euclidean-plane":
            return p + t * (q - p)
        if self.kind == "hyperbolic-plane":
            zp, zq = complex(*p), complex(*q)
            w = (zq - zp) / (1 - zp.conjugate() * zq)
            if abs(w) == 0:
                return p.copy()
            s = t * 2 * math.atanh(abs(w))
            z = math.tanh(0.5 * s) * w / abs(w)
            r = (z + zp) / (1 + zp.conjugate() * z)
            return np.array([r.real, r.imag])
        if self.kind == "tree":
            (lp, tp), (lq, tq) = p, q
            if lp == lq or tp == 0 or tq == 0:
                leg = lp if tp > 0 else lq
                return np.array([leg, tp + t * (tq - tp)])
            s = t * (tp + tq)
            return np.array([lp, tp - s]) if s <= tp else np.array([lq, s - tp])
        # mesh: vertex of the shortest path nearest to the requested fraction
        from .metric import geodesic

        g = geodesic(self.space, int(p[0]), int(q[0]))
        k = int(np.argmin(np.abs(g.cumulative - t * g.total)))
        return np.array([float(g.vertices[k]), 0.0])

    def barycenter(self, pts, weights, start=None, tol: float = BARYCENTER_TOL) -> np.ndarray:
        """Minimizer of ``sum w_i d(x, p_i)^2``."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        w = np.asarray(weights, dtype=float)
        if len(pts) == 0:
            raise SpaceError("barycenter of an empty point list")
        if np.any(w < 0) or not w.sum() > 0:
            raise SpaceError("barycenter weights must be >= 0 with a positive sum")
        if self.kind == "mesh":
            return self._mesh_barycenter(pts, w)
        x0, y0 = (pts[int(np.argmax(w))] if start is None else np.asarray(start, dtype=float))
        bx, by = K.barycenter_kernel(_KERNEL_KIND[self.kind], np.ascontiguousarray(pts[:, 0]),
                                     np.ascontiguousarray(pts[:, 1]), w, float(x0), float(y0), tol)
        return np.array([bx, by])

    def _mesh_barycenter(self, pts, w) -> np.ndarray:
        # discrete: best vertex inside a ball that contains every input point
        space = self.space
        rows = space.rows(pts[:, 0].astype(int))
        anchor = rows[0]
        radius = float(np.max(anchor[pts[:, 0].astype(int)]))
        cand = np.flatnonzero(anchor <= radius + 1e-12)
        cost = (w[:, None] * rows[:, cand] ** 2).sum(axis=0)
        return np.array([float(cand[int(np.argmin(cost))]), 0.0])

    @property
    def kernel_kind(self) -> int:
        if self.kind == "mesh":
            raise SpaceError("mesh targets have no sweep kernel")
        return _KERNEL_KIND[self.kind]
