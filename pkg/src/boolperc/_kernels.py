"""Hot loops compiled with numba: pairwise GJK over packed grain arrays,
a capsule-rasterised broad phase for d = 2, BFS, and union-find.

Everything here mirrors the pure-python reference implementations in
`geometry` and `graph`; agreement is enforced by tests.  If numba is
missing the module still works (slowly) through a no-op decorator.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(f):
            return f

        return deco


# ---------------------------------------------------------------------------
# support functions on packed arrays
# ---------------------------------------------------------------------------

@njit(cache=True)
def _support_world(kind, center, size, rot, vp_off, vp_verts, g, v, w, sl, out):
    """Support point of grain g in world direction v (buffers w, sl, out)."""
    d = v.shape[0]
    for i in range(d):
        acc = 0.0
        for r in range(d):
            acc += rot[g, r, i] * v[r]
        w[i] = acc
    k = kind[g]
    if k == 0:  # box
        for i in range(d):
            sl[i] = size[g, i] if w[i] >= 0.0 else -size[g, i]
    elif k == 1:  # ellipsoid
        h = 0.0
        for i in range(d):
            t = size[g, i] * w[i]
            sl[i] = t
            h += t * t
        h = np.sqrt(h)
        if h == 0.0:
            for i in range(d):
                sl[i] = 0.0
            sl[0] = size[g, 0]
        else:
            for i in range(d):
                sl[i] = size[g, i] * sl[i] / h
    elif k == 2:  # cross-polytope
        best = -1.0
        bi = 0
        for i in range(d):
            sc = size[g, i] * abs(w[i])
            if sc > best:
                best = sc
                bi = i
        for i in range(d):
            sl[i] = 0.0
        sl[bi] = size[g, bi] if w[bi] >= 0.0 else -size[g, bi]
    else:  # vertex polytope
        best = -1.0e300
        bi = vp_off[g]
        for vi in range(vp_off[g], vp_off[g + 1]):
            acc = 0.0
            for i in range(d):
                acc += vp_verts[vi, i] * w[i]
            if acc > best:
                best = acc
                bi = vi
        for i in range(d):
            sl[i] = vp_verts[bi, i]
    for r in range(d):
        acc = center[g, r]
        for i in range(d):
            acc += rot[g, r, i] * sl[i]
        out[r] = acc


@njit(cache=True)
def _closest_subset(W, k, d, gram, rhs, sol, lam, best_lam, keep, p, best_p):
    """Closest point to the origin on the hull of the first k rows of W.

    Enumerates subsets, solves the affine system with Gaussian
    elimination, keeps the best subset with nonnegative barycentrics.
    Compacts W in place to the kept subset; returns (norm2, new_k).
    """
    best_n2 = 1.0e300
    best_mask = 0
    found = False
    for mask in range(1, 1 << k):
        r = 0
        first = -1
        for i in range(k):
            if mask & (1 << i):
                if first < 0:
                    first = i
                r += 1
        if r == 1:
            n2 = 0.0
            for c in range(d):
                n2 += W[first, c] * W[first, c]
            if (not found) or n2 < best_n2:
                found = True
                best_n2 = n2
                best_mask = mask
                for c in range(d):
                    best_p[c] = W[first, c]
            continue
        # rows of the difference matrix: members after the first
        m = r - 1
        row = 0
        for i in range(first + 1, k):
            if not (mask & (1 << i)):
                continue
            acc_rhs = 0.0
            col = 0
            for jdx in range(first + 1, k):
                if not (mask & (1 << jdx)):
                    continue
                acc = 0.0
                for c in range(d):
                    acc += (W[i, c] - W[first, c]) * (W[jdx, c] - W[first, c])
                gram[row, col] = acc
                col += 1
            for c in range(d):
                acc_rhs += (W[i, c] - W[first, c]) * W[first, c]
            rhs[row] = -acc_rhs
            row += 1
        # gaussian elimination with partial pivoting
        singular = False
        for c in range(m):
            piv = c
            big = abs(gram[c, c])
            for rr in range(c + 1, m):
                if abs(gram[rr, c]) > big:
                    big = abs(gram[rr, c])
                    piv = rr
            if big < 1e-300:
                singular = True
                break
            if piv != c:
                for cc in range(m):
                    tmp = gram[c, cc]
                    gram[c, cc] = gram[piv, cc]
                    gram[piv, cc] = tmp
                tmp = rhs[c]
                rhs[c] = rhs[piv]
                rhs[piv] = tmp
            inv = 1.0 / gram[c, c]
            for rr in range(c + 1, m):
                f = gram[rr, c] * inv
                for cc in range(c, m):
                    gram[rr, cc] -= f * gram[c, cc]
                rhs[rr] -= f * rhs[c]
        if singular:
            continue
        for c in range(m - 1, -1, -1):
            acc = rhs[c]
            for cc in range(c + 1, m):
                acc -= gram[c, cc] * sol[cc]
            sol[c] = acc / gram[c, c]
        tsum = 0.0
        for c in range(m):
            tsum += sol[c]
        lam[0] = 1.0 - tsum
        ok = lam[0] >= -1e-12
        for c in range(m):
            lam[c + 1] = sol[c]
            if sol[c] < -1e-12:
                ok = False
        if not ok:
            continue
        for c in range(d):
            p[c] = 0.0
        idx = 0
        for i in range(k):
            if mask & (1 << i):
                for c in range(d):
                    p[c] += lam[idx] * W[i, c]
                idx += 1
        n2 = 0.0
        for c in range(d):
            n2 += p[c] * p[c]
        if (not found) or n2 < best_n2:
            found = True
            best_n2 = n2
            best_mask = mask
            for c in range(d):
                best_p[c] = p[c]
    if not found:
        # fall back to the nearest vertex
        best_n2 = 1.0e300
        bi = 0
        for i in range(k):
            n2 = 0.0
            for c in range(d):
                n2 += W[i, c] * W[i, c]
            if n2 < best_n2:
                best_n2 = n2
                bi = i
        best_mask = 1 << bi
        for c in range(d):
            best_p[c] = W[bi, c]
    # compact W to the kept subset
    nk = 0
    for i in range(k):
        if best_mask & (1 << i):
            if nk != i:
                for c in range(d):
                    W[nk, c] = W[i, c]
            nk += 1
    return best_n2, nk


@njit(cache=True)
def gjk_pairs(kind, center, size, rot, vp_off, vp_verts, brad,
              pi, pj, tol, need_dist):
    """Distance bounds for each grain pair; mirrors geometry.gjk_bounds.

    Returns (lo, hi, err): hi = +inf when an early separation certificate
    fired (need_dist false); err flags exhausted iteration budgets.
    """
    nq = pi.shape[0]
    d = center.shape[1]
    lo_out = np.empty(nq)
    hi_out = np.empty(nq)
    err = np.zeros(nq, dtype=np.uint8)

    W = np.empty((d + 2, d))
    gram = np.empty((d + 1, d + 1))
    rhs = np.empty(d + 1)
    sol = np.empty(d + 1)
    lam = np.empty(d + 2)
    best_lam = np.empty(d + 2)
    keep = np.empty(d + 2, dtype=np.int64)
    pbuf = np.empty(d)
    best_p = np.empty(d)
    v = np.empty(d)
    vhat = np.empty(d)
    nvhat = np.empty(d)
    sa = np.empty(d)
    sb = np.empty(d)
    wbuf = np.empty(d)
    slbuf = np.empty(d)
    s = np.empty(d)

    max_iter = 160
    for q in range(nq):
        a = pi[q]
        b = pj[q]
        dist2 = 0.0
        for c in range(d):
            v[c] = center[a, c] - center[b, c]
            dist2 += v[c] * v[c]
        scale = 1.0 + np.sqrt(dist2) + brad[a] + brad[b]
        if dist2 < 1e-300:
            for c in range(d):
                v[c] = 0.0
            v[0] = scale
        eps_zero = 1e-13 * scale
        eps_gap = 1e-12 * scale
        dup_eps = 1e-14 * scale

        k = 0
        best_lower = -1.0e300
        lo_q = 0.0
        hi_q = np.inf
        status = 2  # 0 done, 2 budget exhausted
        for _ in range(max_iter):
            nv = 0.0
            for c in range(d):
                nv += v[c] * v[c]
            nv = np.sqrt(nv)
            if nv <= eps_zero:
                lo_q = 0.0
                hi_q = 0.0
                status = 0
                break
            for c in range(d):
                vhat[c] = v[c] / nv
                nvhat[c] = -vhat[c]
            _support_world(kind, center, size, rot, vp_off, vp_verts,
                           a, nvhat, wbuf, slbuf, sa)
            _support_world(kind, center, size, rot, vp_off, vp_verts,
                           b, vhat, wbuf, slbuf, sb)
            lower = 0.0
            for c in range(d):
                s[c] = sa[c] - sb[c]
                lower += s[c] * vhat[c]
            if lower > best_lower:
                best_lower = lower
            if (not need_dist) and best_lower > tol:
                lo_q = best_lower
                hi_q = np.inf
                status = 0
                break
            if nv - lower <= eps_gap + 1e-12 * nv:
                lo_q = best_lower if best_lower > 0.0 else 0.0
                hi_q = nv
                status = 0
                break
            dup = False
            for i in range(k):
                dd = 0.0
                for c in range(d):
                    diff = s[c] - W[i, c]
                    dd += diff * diff
                if np.sqrt(dd) <= dup_eps:
                    dup = True
                    break
            if dup:
                lo_q = best_lower if best_lower > 0.0 else 0.0
                hi_q = nv
                status = 0
                break
            for c in range(d):
                W[k, c] = s[c]
            k += 1
            n2, k = _closest_subset(W, k, d, gram, rhs, sol, lam, best_lam,
                                    keep, pbuf, best_p)
            for c in range(d):
                v[c] = best_p[c]
            if k == d + 1:
                lo_q = 0.0
                hi_q = 0.0
                status = 0
                break
        if status != 0:
            err[q] = 1
        lo_out[q] = lo_q
        hi_out[q] = hi_q
    return lo_out, hi_out, err


# ---------------------------------------------------------------------------
# specialised planar pair predicate
# ---------------------------------------------------------------------------

@njit(cache=True)
def _support2(kind, center, size, rot, vp_off, vp_verts, g, vx, vy):
    """2D support point of grain g in world direction (vx, vy)."""
    r00 = rot[g, 0, 0]
    r10 = rot[g, 1, 0]
    r01 = rot[g, 0, 1]
    r11 = rot[g, 1, 1]
    wx = r00 * vx + r10 * vy
    wy = r01 * vx + r11 * vy
    k = kind[g]
    if k == 1:  # ellipse
        tx = size[g, 0] * wx
        ty = size[g, 1] * wy
        h = np.sqrt(tx * tx + ty * ty)
        if h == 0.0:
            sx = size[g, 0]
            sy = 0.0
        else:
            sx = size[g, 0] * tx / h
            sy = size[g, 1] * ty / h
    elif k == 0:  # box
        sx = size[g, 0] if wx >= 0.0 else -size[g, 0]
        sy = size[g, 1] if wy >= 0.0 else -size[g, 1]
    elif k == 2:  # cross
        if size[g, 0] * abs(wx) >= size[g, 1] * abs(wy):
            sx = size[g, 0] if wx >= 0.0 else -size[g, 0]
            sy = 0.0
        else:
            sx = 0.0
            sy = size[g, 1] if wy >= 0.0 else -size[g, 1]
    else:  # vertex polytope
        best = -1.0e300
        sx = 0.0
        sy = 0.0
        for vi in range(vp_off[g], vp_off[g + 1]):
            acc = vp_verts[vi, 0] * wx + vp_verts[vi, 1] * wy
            if acc > best:
                best = acc
                sx = vp_verts[vi, 0]
                sy = vp_verts[vi, 1]
    ox = center[g, 0] + r00 * sx + r01 * sy
    oy = center[g, 1] + r10 * sx + r11 * sy
    return ox, oy


@njit(cache=True)
def _inner_capsule2(kind, size, g):
    """(seg, rad) of a capsule certified INSIDE grain g (0, 0 if none)."""
    k = kind[g]
    a = size[g, 0]
    b = size[g, 1]
    if k == 1:
        # disc of radius b*sqrt(1 - x0^2/(a^2-b^2)) centred at (x0, 0) lies
        # inside the ellipse for x0 <= (a^2-b^2)/a
        seg = 0.9 * (a * a - b * b) / a
        rad = b * np.sqrt(1.0 - 0.81 * (a * a - b * b) / (a * a))
        return seg, rad
    if k == 0:
        seg = a - b if a > b else 0.0
        return seg, b
    if k == 2:
        rad = 0.5 * a * b / np.sqrt(a * a + b * b)
        return 0.5 * a, rad
    return 0.0, 0.0


@njit(cache=True)
def _gjk_pair2(kind, center, size, rot, vp_off, vp_verts, a, b, scale,
               tol, need_dist):
    """2D GJK distance loop; returns (lo, hi, ok)."""
    eps_zero = 1e-13 * scale
    eps_gap = 1e-12 * scale
    dup_eps = 1e-14 * scale

    vx = center[a, 0] - center[b, 0]
    vy = center[a, 1] - center[b, 1]
    if vx * vx + vy * vy < 1e-300:
        vx = scale
        vy = 0.0
    w0x = 0.0
    w0y = 0.0
    w1x = 0.0
    w1y = 0.0
    k = 0
    best_lower = -1.0e300
    for _ in range(160):
        nv = np.sqrt(vx * vx + vy * vy)
        if nv <= eps_zero:
            return 0.0, 0.0, True
        ux = vx / nv
        uy = vy / nv
        ax_, ay_ = _support2(kind, center, size, rot, vp_off, vp_verts,
                             a, -ux, -uy)
        bx_, by_ = _support2(kind, center, size, rot, vp_off, vp_verts,
                             b, ux, uy)
        sx = ax_ - bx_
        sy = ay_ - by_
        lower = sx * ux + sy * uy
        if lower > best_lower:
            best_lower = lower
        if (not need_dist) and best_lower > tol:
            return best_lower, np.inf, True
        if (not need_dist) and nv <= tol:
            # the simplex point is an upper bound: already a hit
            return (best_lower if best_lower > 0.0 else 0.0), nv, True
        if nv - lower <= eps_gap + 1e-12 * nv:
            return (best_lower if best_lower > 0.0 else 0.0), nv, True
        if k >= 1:
            dx = sx - w0x
            dy = sy - w0y
            if np.sqrt(dx * dx + dy * dy) <= dup_eps:
                return (best_lower if best_lower > 0.0 else 0.0), nv, True
            if k == 2:
                dx = sx - w1x
                dy = sy - w1y
                if np.sqrt(dx * dx + dy * dy) <= dup_eps:
                    return (best_lower if best_lower > 0.0 else 0.0), nv, True
        # update the simplex with s and take the closest point on it
        if k == 0:
            w0x = sx
            w0y = sy
            vx = sx
            vy = sy
            k = 1
        elif k == 1:
            # closest point to the origin on segment w0-s
            ex = sx - w0x
            ey = sy - w0y
            ee = ex * ex + ey * ey
            if ee < 1e-300:
                w0x = sx
                w0y = sy
                vx = sx
                vy = sy
            else:
                t = -(w0x * ex + w0y * ey) / ee
                if t >= 1.0:
                    w0x = sx
                    w0y = sy
                    vx = sx
                    vy = sy
                elif t <= 0.0:
                    # no progress past w0; next support repeats and the
                    # duplicate check terminates with the current bounds
                    vx = w0x
                    vy = w0y
                else:
                    w1x = sx
                    w1y = sy
                    vx = w0x + t * ex
                    vy = w0y + t * ey
                    k = 2
        else:
            # triangle w0, w1, s: closest point to origin
            vx2, vy2, keep = _triangle_closest(w0x, w0y, w1x, w1y, sx, sy)
            vx = vx2
            vy = vy2
            if keep == 3:
                return 0.0, 0.0, True
            if keep == 0:      # vertex s
                w0x = sx
                w0y = sy
                k = 1
            elif keep == 1:    # edge w0-s
                w1x = sx
                w1y = sy
                k = 2
            elif keep == 2:    # edge w1-s
                w0x = w1x
                w0y = w1y
                w1x = sx
                w1y = sy
                k = 2
            elif keep == 4:    # vertex w0
                k = 1
            elif keep == 5:    # vertex w1
                w0x = w1x
                w0y = w1y
                k = 1
            else:              # keep == 6: edge w0-w1 unchanged
                k = 2
    return 0.0, 0.0, False


@njit(cache=True)
def _triangle_closest(ax, ay, bx, by, cx, cy):
    """Closest point to the origin on triangle ABC (C is the new vertex).

    Returns (px, py, keep) with keep coding the retained feature:
    0 vertex C, 1 edge A-C, 2 edge B-C, 3 interior, 4 vertex A,
    5 vertex B, 6 edge A-B.
    """
    abx = bx - ax
    aby = by - ay
    acx = cx - ax
    acy = cy - ay
    apx = -ax
    apy = -ay
    d1 = abx * apx + aby * apy
    d2 = acx * apx + acy * apy
    if d1 <= 0.0 and d2 <= 0.0:
        return ax, ay, 4
    bpx = -bx
    bpy = -by
    d3 = abx * bpx + aby * bpy
    d4 = acx * bpx + acy * bpy
    if d3 >= 0.0 and d4 <= d3:
        return bx, by, 5
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        t = d1 / (d1 - d3)
        return ax + t * abx, ay + t * aby, 6
    cpx = -cx
    cpy = -cy
    d5 = abx * cpx + aby * cpy
    d6 = acx * cpx + acy * cpy
    if d6 >= 0.0 and d5 <= d6:
        return cx, cy, 0
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        t = d2 / (d2 - d6)
        return ax + t * acx, ay + t * acy, 1
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return bx + t * (cx - bx), by + t * (cy - by), 2
    return 0.0, 0.0, 3


@njit(cache=True)
def gjk_pairs2(kind, center, size, rot, vp_off, vp_verts, brad,
               pi, pj, tol, need_dist):
    """Planar batch predicate with capsule fast paths; mirrors gjk_pairs."""
    nq = pi.shape[0]
    lo_out = np.empty(nq)
    hi_out = np.empty(nq)
    err = np.zeros(nq, dtype=np.uint8)
    for q in range(nq):
        a = pi[q]
        b = pj[q]
        dx = center[a, 0] - center[b, 0]
        dy = center[a, 1] - center[b, 1]
        cd = np.sqrt(dx * dx + dy * dy)
        scale = 1.0 + cd + brad[a] + brad[b]
        # bounding-sphere separation certificate
        lo_sphere = cd - brad[a] - brad[b]
        if (not need_dist) and lo_sphere > tol:
            lo_out[q] = lo_sphere
            hi_out[q] = np.inf
            continue
        # certified-inside capsule overlap => true intersection
        sa, ra = _inner_capsule2(kind, size, a)
        sb, rb = _inner_capsule2(kind, size, b)
        if ra > 0.0 and rb > 0.0:
            d2 = _seg_seg_dist2(center[a, 0], center[a, 1],
                                rot[a, 0, 0], rot[a, 1, 0], sa,
                                center[b, 0], center[b, 1],
                                rot[b, 0, 0], rot[b, 1, 0], sb)
            rr = ra + rb
            if d2 <= rr * rr:
                lo_out[q] = 0.0
                hi_out[q] = 0.0
                continue
        lo, hi, ok = _gjk_pair2(kind, center, size, rot, vp_off, vp_verts,
                                a, b, scale, tol, need_dist)
        lo_out[q] = lo
        hi_out[q] = hi
        if not ok:
            err[q] = 1
    return lo_out, hi_out, err


# ---------------------------------------------------------------------------
# 2D broad phase: capsule rasterisation on a dense cell grid
# ---------------------------------------------------------------------------

@njit(cache=True)
def _grid_ranges(cx, cy, ux, uy, seg, rho, cs, ix, gy0, ny):
    """y cell range of the capsule slice over cell column ix (cells of size
    cs, origin gy0*cs).  Returns (iy_lo, iy_hi) inclusive, or (1, 0)."""
    x_lo = ix * cs - rho
    x_hi = (ix + 1) * cs + rho
    if abs(ux) > 1e-12:
        t0 = (x_lo - cx) / ux
        t1 = (x_hi - cx) / ux
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 < -seg:
            t0 = -seg
        if t1 > seg:
            t1 = seg
        if t0 > t1:
            return 1, 0
    else:
        t0 = -seg
        t1 = seg
    y0 = cy + t0 * uy
    y1 = cy + t1 * uy
    if y0 > y1:
        y0, y1 = y1, y0
    iy_lo = int(np.floor((y0 - rho) / cs)) - gy0
    iy_hi = int(np.floor((y1 + rho) / cs)) - gy0
    if iy_lo < 0:
        iy_lo = 0
    if iy_hi > ny - 1:
        iy_hi = ny - 1
    return iy_lo, iy_hi


@njit(cache=True)
def grid_fill(center, axis, seg, trans, cs, gx0, gy0, nx, ny):
    """Register each capsule in every cell it can touch.

    Two passes: per-cell counts, then CSR fill.  Returns (cell_ptr,
    cell_items)."""
    n = center.shape[0]
    ncell = nx * ny
    counts = np.zeros(ncell + 1, dtype=np.int64)
    for g in range(n):
        rho = trans[g]
        ext = seg[g] * abs(axis[g, 0]) + rho
        ix_lo = int(np.floor((center[g, 0] - ext) / cs)) - gx0
        ix_hi = int(np.floor((center[g, 0] + ext) / cs)) - gx0
        if ix_lo < 0:
            ix_lo = 0
        if ix_hi > nx - 1:
            ix_hi = nx - 1
        for ix in range(ix_lo, ix_hi + 1):
            iy_lo, iy_hi = _grid_ranges(center[g, 0], center[g, 1],
                                        axis[g, 0], axis[g, 1], seg[g], rho,
                                        cs, ix + gx0, gy0, ny)
            if iy_lo <= iy_hi:
                base = ix * ny
                for iy in range(iy_lo, iy_hi + 1):
                    counts[base + iy + 1] += 1
    for c in range(ncell):
        counts[c + 1] += counts[c]
    items = np.empty(counts[ncell], dtype=np.int32)
    cursor = counts[:-1].copy()
    for g in range(n):
        rho = trans[g]
        ext = seg[g] * abs(axis[g, 0]) + rho
        ix_lo = int(np.floor((center[g, 0] - ext) / cs)) - gx0
        ix_hi = int(np.floor((center[g, 0] + ext) / cs)) - gx0
        if ix_lo < 0:
            ix_lo = 0
        if ix_hi > nx - 1:
            ix_hi = nx - 1
        for ix in range(ix_lo, ix_hi + 1):
            iy_lo, iy_hi = _grid_ranges(center[g, 0], center[g, 1],
                                        axis[g, 0], axis[g, 1], seg[g], rho,
                                        cs, ix + gx0, gy0, ny)
            if iy_lo <= iy_hi:
                base = ix * ny
                for iy in range(iy_lo, iy_hi + 1):
                    cell = base + iy
                    items[cursor[cell]] = g
                    cursor[cell] += 1
    return counts, items


@njit(cache=True)
def _seg_seg_dist2(p1x, p1y, u1x, u1y, l1, p2x, p2y, u2x, u2y, l2):
    """Squared distance between segments center +/- l * u (2D)."""
    # segment endpoints
    ax = p1x - l1 * u1x
    ay = p1y - l1 * u1y
    bx = p1x + l1 * u1x
    by = p1y + l1 * u1y
    cx = p2x - l2 * u2x
    cy = p2y - l2 * u2y
    dx = p2x + l2 * u2x
    dy = p2y + l2 * u2y
    d1x = bx - ax
    d1y = by - ay
    d2x = dx - cx
    d2y = dy - cy
    rx = ax - cx
    ry = ay - cy
    a = d1x * d1x + d1y * d1y
    e = d2x * d2x + d2y * d2y
    f = d2x * rx + d2y * ry
    if a <= 1e-300 and e <= 1e-300:
        return rx * rx + ry * ry
    if a <= 1e-300:
        s = 0.0
        t = f / e
        t = min(1.0, max(0.0, t))
    else:
        c = d1x * rx + d1y * ry
        if e <= 1e-300:
            t = 0.0
            s = min(1.0, max(0.0, -c / a))
        else:
            b = d1x * d2x + d1y * d2y
            denom = a * e - b * b
            if denom > 1e-300:
                s = min(1.0, max(0.0, (b * f - c * e) / denom))
            else:
                s = 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(1.0, max(0.0, -c / a))
            elif t > 1.0:
                t = 1.0
                s = min(1.0, max(0.0, (b - c) / a))
    qx = ax + d1x * s - (cx + d2x * t)
    qy = ay + d1y * s - (cy + d2y * t)
    return qx * qx + qy * qy


@njit(cache=True)
def candidate_pairs_slab(cell_ptr, cell_items, cell_lo, cell_hi,
                         center, axis, seg, trans, brad, pad,
                         out_i, out_j):
    """Emit prefiltered co-cell pairs from cells [cell_lo, cell_hi).

    Prefilters: bounding circles, then covering capsules (with pad so no
    true intersection within pad is lost).  Returns the count; if the
    output buffers are too small, keeps counting without writing so the
    caller can retry with bigger buffers.
    """
    cap = out_i.shape[0]
    cnt = 0
    for cell in range(cell_lo, cell_hi):
        lo = cell_ptr[cell]
        hi = cell_ptr[cell + 1]
        for u in range(lo, hi):
            g1 = cell_items[u]
            for w in range(u + 1, hi):
                g2 = cell_items[w]
                dx = center[g1, 0] - center[g2, 0]
                dy = center[g1, 1] - center[g2, 1]
                rr = brad[g1] + brad[g2] + pad
                if dx * dx + dy * dy > rr * rr:
                    continue
                tt = trans[g1] + trans[g2] + pad
                d2 = _seg_seg_dist2(center[g1, 0], center[g1, 1],
                                    axis[g1, 0], axis[g1, 1], seg[g1],
                                    center[g2, 0], center[g2, 1],
                                    axis[g2, 0], axis[g2, 1], seg[g2])
                if d2 > tt * tt:
                    continue
                if cnt < cap:
                    if g1 < g2:
                        out_i[cnt] = g1
                        out_j[cnt] = g2
                    else:
                        out_i[cnt] = g2
                        out_j[cnt] = g1
                cnt += 1
    return cnt


@njit(cache=True)
def _ellipse_exit_accept(center, size, rot, g1, g2):
    """Sound overlap certificate: the point where the centre segment
    leaves ellipse g1 lies inside ellipse g2 (or the centre of g2 lies in
    g1).  Incomplete: a False only means "not decided"."""
    dx = center[g2, 0] - center[g1, 0]
    dy = center[g2, 1] - center[g1, 1]
    # local coordinates in g1's frame
    lx = rot[g1, 0, 0] * dx + rot[g1, 1, 0] * dy
    ly = rot[g1, 0, 1] * dx + rot[g1, 1, 1] * dy
    alpha = (lx / size[g1, 0]) ** 2 + (ly / size[g1, 1]) ** 2
    if alpha <= 1.0:
        return True  # centre of g2 inside g1
    t = 1.0 / np.sqrt(alpha)
    qx = center[g1, 0] + t * dx
    qy = center[g1, 1] + t * dy
    ex = qx - center[g2, 0]
    ey = qy - center[g2, 1]
    mx = rot[g2, 0, 0] * ex + rot[g2, 1, 0] * ey
    my = rot[g2, 0, 1] * ex + rot[g2, 1, 1] * ey
    return (mx / size[g2, 0]) ** 2 + (my / size[g2, 1]) ** 2 <= 1.0


@njit(cache=True)
def edges_slab(cell_ptr, cell_items, cell_lo, cell_hi,
               kind, center, size, rot, vp_off, vp_verts,
               axis, seg, trans, iseg, irad, brad, tol,
               out_i, out_j):
    """Fused broad phase + predicate over cells [cell_lo, cell_hi).

    Per co-cell pair: circle reject, covering-capsule reject, certified
    inner-capsule / ellipse exit-point accepts, then the full support-
    function loop.  Emits accepted edges (possibly duplicated across
    cells; deduplicated downstream).  Returns (count, error_flag).
    """
    cap = out_i.shape[0]
    cnt = 0
    pad = tol if tol > 1e-9 else 1e-9
    for cell in range(cell_lo, cell_hi):
        lo = cell_ptr[cell]
        hi = cell_ptr[cell + 1]
        for u in range(lo, hi):
            g1 = cell_items[u]
            for w in range(u + 1, hi):
                g2 = cell_items[w]
                dx = center[g1, 0] - center[g2, 0]
                dy = center[g1, 1] - center[g2, 1]
                cd2 = dx * dx + dy * dy
                rr = brad[g1] + brad[g2] + pad
                if cd2 > rr * rr:
                    continue
                tt = trans[g1] + trans[g2] + pad
                d2 = _seg_seg_dist2(center[g1, 0], center[g1, 1],
                                    axis[g1, 0], axis[g1, 1], seg[g1],
                                    center[g2, 0], center[g2, 1],
                                    axis[g2, 0], axis[g2, 1], seg[g2])
                if d2 > tt * tt:
                    continue
                hit = False
                if irad[g1] > 0.0 and irad[g2] > 0.0:
                    ri = irad[g1] + irad[g2]
                    di = _seg_seg_dist2(center[g1, 0], center[g1, 1],
                                        axis[g1, 0], axis[g1, 1], iseg[g1],
                                        center[g2, 0], center[g2, 1],
                                        axis[g2, 0], axis[g2, 1], iseg[g2])
                    hit = di <= ri * ri
                if (not hit) and kind[g1] == 1 and kind[g2] == 1:
                    hit = _ellipse_exit_accept(center, size, rot, g1, g2) \
                        or _ellipse_exit_accept(center, size, rot, g2, g1)
                if not hit:
                    scale = 1.0 + np.sqrt(cd2) + brad[g1] + brad[g2]
                    lo_d, hi_d, ok = _gjk_pair2(kind, center, size, rot,
                                                vp_off, vp_verts, g1, g2,
                                                scale, tol, False)
                    if not ok:
                        return cnt, g1 * np.int64(2 ** 31) + g2 + 1
                    hit = np.isfinite(hi_d) and hi_d <= tol
                if hit:
                    if cnt < cap:
                        if g1 < g2:
                            out_i[cnt] = g1
                            out_j[cnt] = g2
                        else:
                            out_i[cnt] = g2
                            out_j[cnt] = g1
                    cnt += 1
    return cnt, np.int64(0)


# ---------------------------------------------------------------------------
# graph kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def bfs_distance(indptr, indices, src, dst):
    """Edge count of the shortest path, or -1 if unreachable."""
    n = indptr.shape[0] - 1
    if src == dst:
        return 0
    dist = np.full(n, -1, dtype=np.int32)
    queue = np.empty(n, dtype=np.int32)
    head = 0
    tail = 0
    dist[src] = 0
    queue[tail] = src
    tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            if dist[v] < 0:
                if v == dst:
                    return du + 1
                dist[v] = du + 1
                queue[tail] = v
                tail += 1
    return -1


@njit(cache=True)
def bfs_levels(indptr, indices, src):
    """All BFS levels from src (-1 where unreachable)."""
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, dtype=np.int32)
    queue = np.empty(n, dtype=np.int32)
    head = 0
    tail = 0
    dist[src] = 0
    queue[tail] = src
    tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            if dist[v] < 0:
                dist[v] = du + 1
                queue[tail] = v
                tail += 1
    return dist


@njit(cache=True)
def _dsu_find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def union_find_labels(n, ei, ej):
    """Connected-component roots via union by size with path compression."""
    parent = np.arange(n, dtype=np.int64)
    size = np.ones(n, dtype=np.int64)
    for t in range(ei.shape[0]):
        ra = _dsu_find(parent, ei[t])
        rb = _dsu_find(parent, ej[t])
        if ra == rb:
            continue
        if size[ra] < size[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]
    roots = np.empty(n, dtype=np.int64)
    for x in range(n):
        roots[x] = _dsu_find(parent, x)
    return roots
