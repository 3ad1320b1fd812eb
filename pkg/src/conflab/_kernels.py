"""Hot inner loops.

Every function here is written in the numba-compatible subset of Python and
compiled by :func:`conflab._accel.jit` unless ``CONFLAB_BACKEND=numpy`` is
set, in which case the same source runs interpreted. Graphs are CSR triples
``(indptr, indices, weights)`` with sorted ``indices`` per row.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import jit, prange

# target kinds understood by the sweep kernels
EUCLIDEAN = 0
HYPERBOLIC = 1
STAR_TREE = 2


# ---------------------------------------------------------------------------
# shortest paths


@jit
def _sift_up(heap, pos, key, i):
    v = heap[i]
    kv = key[v]
    while i > 0:
        p = (i - 1) >> 1
        u = heap[p]
        ku = key[u]
        if ku < kv or (ku == kv and u < v):
            break
        heap[i] = u
        pos[u] = i
        i = p
    heap[i] = v
    pos[v] = i


@jit
def _sift_down(heap, pos, key, i, size):
    v = heap[i]
    kv = key[v]
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        r = c + 1
        if r < size:
            kc = key[heap[c]]
            kr = key[heap[r]]
            if kr < kc or (kr == kc and heap[r] < heap[c]):
                c = r
        u = heap[c]
        ku = key[u]
        if kv < ku or (kv == ku and v < u):
            break
        heap[i] = u
        pos[u] = i
        i = c
    heap[i] = v
    pos[v] = i


@jit
def dijkstra_into(indptr, indices, weights, source, dist):
    """Single-source shortest path lengths written into ``dist``."""
    n = dist.shape[0]
    heap = np.empty(n, dtype=np.int64)
    pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        dist[i] = np.inf
    dist[source] = 0.0
    heap[0] = source
    pos[source] = 0
    size = 1
    while size > 0:
        v = heap[0]
        size -= 1
        pos[v] = -2
        if size > 0:
            last = heap[size]
            heap[0] = last
            pos[last] = 0
            _sift_down(heap, pos, dist, 0, size)
        dv = dist[v]
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            if pos[u] == -2:
                continue
            nd = dv + weights[e]
            if nd < dist[u]:
                dist[u] = nd
                if pos[u] == -1:
                    heap[size] = u
                    pos[u] = size
                    size += 1
                    _sift_up(heap, pos, dist, size - 1)
                else:
                    _sift_up(heap, pos, dist, pos[u])


@jit(parallel=True)
def multi_source(indptr, indices, weights, sources, out):
    """Rows of shortest path lengths, one per source; ``out`` is (k, n)."""
    for k in prange(sources.shape[0]):
        dijkstra_into(indptr, indices, weights, sources[k], out[k])


@jit
def walk_geodesic(indptr, indices, weights, row, a, b, rtol, buf):
    """Trace a shortest path a -> b from the distance row of ``a``.

    Walking back from ``b``, the predecessor is the smallest-index neighbour
    ``u`` with ``row[u] + w(u, v) == row[v]`` up to relative ``rtol``.
    Returns the number of vertices written to ``buf`` (in order a..b) or -1.
    """
    cnt = 0
    v = b
    buf[cnt] = v
    cnt += 1
    while v != a:
        target = row[v]
        tol = rtol * target
        nxt = -1
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            ru = row[u]
            if ru < target and abs(ru + weights[e] - target) <= tol:
                nxt = u
                break
        if nxt < 0 or cnt >= buf.shape[0]:
            return -1
        v = nxt
        buf[cnt] = v
        cnt += 1
    for i in range(cnt // 2):
        t = buf[i]
        buf[i] = buf[cnt - 1 - i]
        buf[cnt - 1 - i] = t
    return cnt


# ---------------------------------------------------------------------------
# comparison triangles


@jit
def _side_samples(indptr, indices, weights, D, coords, a, b, n_side, rtol, buf, verts, params):
    """Side points at equal arc-length fractions of a shortest path a -> b.

    Shortest paths on lattices tie exactly (any reordering of the same hops),
    and the lexicographic walk can drift far from the middle of the tie band.
    With chart ``coords`` (n, 2) each point is the tied vertex nearest the
    chart interpolation; the chain must still lie on one shortest path,
    otherwise the walked path is used.
    """
    total = D[a, b]
    tol = rtol * max(total, 1e-300)
    if coords.shape[0] == D.shape[0] and total > 0:
        ok = True
        for j in range(n_side):
            frac = j / (n_side - 1)
            goal = frac * total
            gx = (1.0 - frac) * coords[a, 0] + frac * coords[b, 0]
            gy = (1.0 - frac) * coords[a, 1] + frac * coords[b, 1]
            best = -1
            bestscore = np.inf
            for x in range(D.shape[0]):
                if D[a, x] + D[x, b] - total > tol:
                    continue
                score = (D[a, x] - goal) ** 2 + (coords[x, 0] - gx) ** 2 + (coords[x, 1] - gy) ** 2
                if score < bestscore:
                    bestscore = score
                    best = x
            verts[j] = best
            params[j] = D[a, best] / total
            if j > 0:
                prev = verts[j - 1]
                if abs(D[a, prev] + D[prev, best] - D[a, best]) > tol or D[a, best] < D[a, prev]:
                    ok = False
        if ok:
            return True
    cnt = walk_geodesic(indptr, indices, weights, D[a], a, b, rtol, buf)
    if cnt < 0:
        return False
    for j in range(n_side):
        goal = j / (n_side - 1) * total
        best = 0
        bestgap = np.inf
        for i in range(cnt):
            gap = abs(D[a, buf[i]] - goal)
            if gap < bestgap:
                bestgap = gap
                best = i
        verts[j] = buf[best]
        params[j] = D[a, buf[best]] / total if total > 0 else 0.0
    return True


@jit(parallel=True)
def comparison_scan(indptr, indices, weights, D, coords, tris, n_side, rtol, out_f, out_i):
    """Comparison-triangle slacks for many vertex triples.

    ``out_f`` rows: min_slack, slack_sum, t1, t2, actual, comparison.
    ``out_i`` rows: pair_count, status (0 ok, 1 metric violation, 2 walk failure).
    Side points come from :func:`_side_samples`; their comparison images sit
    at the vertex's true arc-length parameter. ``coords`` may be empty.
    """
    n = D.shape[0]
    for k in prange(tris.shape[0]):
        buf = np.empty(n, dtype=np.int64)
        verts = np.empty((3, n_side), dtype=np.int64)
        params = np.empty((3, n_side))
        p = np.empty((3, 2))
        a0 = tris[k, 0]
        a1 = tris[k, 1]
        a2 = tris[k, 2]
        ends = np.array([a0, a1, a2, a0])
        lens = np.empty(3)
        ok = True
        for s in range(3):
            lens[s] = D[ends[s], ends[s + 1]]
            if not _side_samples(indptr, indices, weights, D, coords, ends[s], ends[s + 1],
                                 n_side, rtol, buf, verts[s], params[s]):
                ok = False
        if not ok:
            out_i[k, 1] = 2
            continue
        l0 = lens[0]
        l1 = lens[1]
        l2 = lens[2]
        slack_tri = 1e-9 * max(1.0, l0 + l1 + l2)
        if l0 > l1 + l2 + slack_tri or l1 > l0 + l2 + slack_tri or l2 > l0 + l1 + slack_tri:
            out_i[k, 1] = 1
            continue
        # comparison triangle: a0 at origin, a1 on the positive x axis
        p[0, 0] = 0.0
        p[0, 1] = 0.0
        p[1, 0] = l0
        p[1, 1] = 0.0
        cx = (l2 * l2 + l0 * l0 - l1 * l1) / (2.0 * l0) if l0 > 0 else 0.0
        p[2, 0] = cx
        p[2, 1] = math.sqrt(max(l2 * l2 - cx * cx, 0.0))
        perim = l0 + l1 + l2
        offs = np.array([0.0, l0, l0 + l1])
        best = np.inf
        total = 0.0
        count = 0
        for s1 in range(3):
            e1 = (s1 + 1) % 3
            for s2 in range(s1 + 1, 3):
                e2 = (s2 + 1) % 3
                for i in range(n_side):
                    u = params[s1, i]
                    x1 = p[s1, 0] + u * (p[e1, 0] - p[s1, 0])
                    y1 = p[s1, 1] + u * (p[e1, 1] - p[s1, 1])
                    vi = verts[s1, i]
                    for j in range(n_side):
                        w = params[s2, j]
                        x2 = p[s2, 0] + w * (p[e2, 0] - p[s2, 0])
                        y2 = p[s2, 1] + w * (p[e2, 1] - p[s2, 1])
                        comp = math.sqrt((x1 - x2) ** 2 + (y1 - y2) ** 2)
                        act = D[vi, verts[s2, j]]
                        slack = comp - act
                        total += slack
                        count += 1
                        if slack < best:
                            best = slack
                            out_f[k, 2] = (offs[s1] + u * lens[s1]) / perim
                            out_f[k, 3] = (offs[s2] + w * lens[s2]) / perim
                            out_f[k, 4] = act
                            out_f[k, 5] = comp
        out_f[k, 0] = best
        out_f[k, 1] = total
        out_i[k, 0] = count
        out_i[k, 1] = 0


# ---------------------------------------------------------------------------
# barycenters on closed-form targets


@jit
def hyperbolic_distance(x1, y1, x2, y2):
    """Poincare-disc distance, stable for nearby points."""
    num = math.sqrt((x1 - x2) ** 2 + (y1 - y2) ** 2)
    den = math.sqrt(max((1.0 - x1 * x1 - y1 * y1) * (1.0 - x2 * x2 - y2 * y2), 0.0))
    if num == 0.0:
        return 0.0
    return 2.0 * math.asinh(num / den)


@jit
def star_tree_distance(l1, t1, l2, t2):
    if t1 == 0.0 or t2 == 0.0 or l1 == l2:
        return abs(t1 - t2)
    return t1 + t2


@jit
def point_distance(kind, x1, y1, x2, y2):
    if kind == EUCLIDEAN:
        return math.sqrt((x1 - x2) ** 2 + (y1 - y2) ** 2)
    if kind == HYPERBOLIC:
        return hyperbolic_distance(x1, y1, x2, y2)
    return star_tree_distance(x1, y1, x2, y2)


@jit
def hyperbolic_barycenter(xs, ys, ws, x0, y0, tol, maxit):
    """Weighted Frechet mean in the Poincare disc.

    Fixed-point iteration p <- exp_p(sum w log_p(q) / W), done at the origin
    after a Mobius translation of p to 0. Returns (x, y, iterations).
    """
    wsum = 0.0
    for i in range(ws.shape[0]):
        wsum += ws[i]
    p = complex(x0, y0)
    it = 0
    while it < maxit:
        it += 1
        vx = 0.0
        vy = 0.0
        for i in range(xs.shape[0]):
            q = complex(xs[i], ys[i])
            qq = (q - p) / (1.0 - p.conjugate() * q)
            r = abs(qq)
            if r == 0.0:
                continue
            d = 2.0 * math.atanh(min(r, 1.0 - 1e-16))
            vx += ws[i] * d * qq.real / r
            vy += ws[i] * d * qq.imag / r
        vx /= wsum
        vy /= wsum
        step = math.sqrt(vx * vx + vy * vy)
        if step == 0.0:
            break
        rr = math.tanh(0.5 * step)
        z = complex(rr * vx / step, rr * vy / step)
        p = (z + p) / (1.0 + p.conjugate() * z)
        if step <= tol:
            break
    return p.real, p.imag, it


@jit
def star_tree_barycenter(legs, ts, ws):
    """Exact weighted barycenter on a star tree; points are (leg, t)."""
    wsum = 0.0
    for i in range(ws.shape[0]):
        wsum += ws[i]
    best_leg = 0.0
    best_t = 0.0
    for i in range(legs.shape[0]):
        if ts[i] <= 0.0:
            continue
        leg = legs[i]
        s = 0.0
        for j in range(legs.shape[0]):
            if ts[j] > 0.0 and legs[j] == leg:
                s += ws[j] * ts[j]
            else:
                s -= ws[j] * ts[j]
        s /= wsum
        if s > best_t:
            best_t = s
            best_leg = leg
    return best_leg, best_t


@jit
def barycenter_kernel(kind, xs, ys, ws, x0, y0, tol):
    if kind == EUCLIDEAN:
        sx = 0.0
        sy = 0.0
        sw = 0.0
        for i in range(xs.shape[0]):
            sx += ws[i] * xs[i]
            sy += ws[i] * ys[i]
            sw += ws[i]
        return sx / sw, sy / sw
    if kind == HYPERBOLIC:
        bx, by, _ = hyperbolic_barycenter(xs, ys, ws, x0, y0, tol, 200)
        return bx, by
    return star_tree_barycenter(xs, ys, ws)


@jit
def relax_sweep(kind, ptr, idx, wts, order, pts, out, tol):
    """One Gauss-Seidel (``out is pts``) or Jacobi (separate ``out``) sweep.

    Each vertex in ``order`` moves to the weighted barycenter of its
    neighbours' images. Returns the largest displacement in target distance.
    """
    maxdisp = 0.0
    for k in range(order.shape[0]):
        v = order[k]
        lo = ptr[v]
        hi = ptr[v + 1]
        m = hi - lo
        xs = np.empty(m)
        ys = np.empty(m)
        ws = np.empty(m)
        for e in range(m):
            u = idx[lo + e]
            xs[e] = pts[u, 0]
            ys[e] = pts[u, 1]
            ws[e] = wts[lo + e]
        bx, by = barycenter_kernel(kind, xs, ys, ws, pts[v, 0], pts[v, 1], tol)
        disp = point_distance(kind, pts[v, 0], pts[v, 1], bx, by)
        if disp > maxdisp:
            maxdisp = disp
        out[v, 0] = bx
        out[v, 1] = by
    return maxdisp


@jit
def edge_energy(kind, ea, eb, c, pts):
    """sum_e c_e * d(pts[ea[e]], pts[eb[e]])**2"""
    total = 0.0
    for e in range(ea.shape[0]):
        a = ea[e]
        b = eb[e]
        d = point_distance(kind, pts[a, 0], pts[a, 1], pts[b, 0], pts[b, 1])
        total += c[e] * d * d
    return total


# ---------------------------------------------------------------------------
# cone neighbour search


@jit
def cone_distance(r1, p1, r2, p2, total_angle):
    d = abs(p1 - p2) % total_angle
    d = min(d, total_angle - d)
    if d >= math.pi:
        return r1 + r2
    return math.sqrt(max(r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * math.cos(d), 0.0))


@jit
def _cone_pairs_pass(radii, starts, counts, offsets, total_angle, rnb, out_i, out_j, out_w, fill):
    nring = radii.shape[0]
    cnt = 0
    for k in range(nring):
        rk = radii[k]
        mk = counts[k]
        for k2 in range(k, nring):
            r2 = radii[k2]
            if r2 - rk > rnb:
                break
            m2 = counts[k2]
            step2 = total_angle / m2
            rmin = min(rk, r2)
            full = True
            dmax = math.pi
            if rmin > 0.0:
                s = rnb / (2.0 * math.sqrt(rk * r2))
                if s < 1.0:
                    dmax = 2.0 * math.asin(s)
                    full = False
            for j in range(mk):
                pj = (j + offsets[k]) * total_angle / mk
                if full or 2 * (int(dmax / step2) + 2) >= m2:
                    jlo = 0
                    jhi = m2 - 1
                    wrap = False
                else:
                    c = int(math.floor(pj / step2 - offsets[k2]))
                    span = int(dmax / step2) + 2
                    jlo = c - span
                    jhi = c + span
                    wrap = True
                for jj in range(jlo, jhi + 1):
                    j2 = jj % m2 if wrap else jj
                    if k2 == k and j2 <= j:
                        continue
                    p2 = (j2 + offsets[k2]) * total_angle / m2
                    d = cone_distance(rk, pj, r2, p2, total_angle)
                    if d <= rnb and d > 0.0:
                        if fill:
                            out_i[cnt] = starts[k] + j
                            out_j[cnt] = starts[k2] + j2
                            out_w[cnt] = d
                        cnt += 1
    return cnt


def cone_ring_pairs(radii, starts, counts, offsets, total_angle, rnb):
    dummy_i = np.empty(0, dtype=np.int64)
    dummy_w = np.empty(0)
    n = _cone_pairs_pass(radii, starts, counts, offsets, total_angle, rnb,
                         dummy_i, dummy_i, dummy_w, False)
    out_i = np.empty(n, dtype=np.int64)
    out_j = np.empty(n, dtype=np.int64)
    out_w = np.empty(n)
    _cone_pairs_pass(radii, starts, counts, offsets, total_angle, rnb, out_i, out_j, out_w, True)
    return out_i, out_j, out_w
