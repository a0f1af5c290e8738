"""Hot inner loops, compiled with numba.

Both kernels are direct sequential formulations of their algorithms; the
array-based callers in depth_prep/atlas unpack the results.  Compilation
is cached on disk, so only the first process pays the JIT cost.
"""
from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def weighted_median_kernel(d, edge, r, inv_two_sigma_sq):
    """Edge-aware weighted median of a disparity image.

    Per window: Gaussian weights on the disparity difference to the center
    (float64), zeroed for samples flagged as edge pixels; if nothing is
    left the plain median of the clipped window is used.  The winner is
    the sample whose preceding and following weight sums balance best,
    first such in value order.
    """
    h, w = d.shape
    out = np.empty((h, w), dtype=np.float32)
    size = (2 * r + 1) * (2 * r + 1)
    vals = np.empty(size, dtype=np.float32)
    wgts = np.empty(size, dtype=np.float64)

    for y in range(h):
        for x in range(w):
            center = np.float64(d[y, x])
            n = 0
            total = 0.0
            for yy in range(max(0, y - r), min(h, y + r + 1)):
                for xx in range(max(0, x - r), min(w, x + r + 1)):
                    v = d[yy, xx]
                    diff = np.float64(v) - center
                    wv = np.exp(-diff * diff * inv_two_sigma_sq)
                    if edge[yy, xx]:
                        wv = 0.0
                    vals[n] = v
                    wgts[n] = wv
                    total += wv
                    n += 1
            if total == 0.0:
                for i in range(n):
                    wgts[i] = 1.0
                total = float(n)
            # Stable insertion sort by value.
            for i in range(1, n):
                v = vals[i]
                wv = wgts[i]
                j = i - 1
                while j >= 0 and vals[j] > v:
                    vals[j + 1] = vals[j]
                    wgts[j + 1] = wgts[j]
                    j -= 1
                vals[j + 1] = v
                wgts[j + 1] = wv
            pre = 0.0
            best_val = vals[0]
            best_imb = np.inf
            for i in range(n):
                wv = wgts[i]
                if wv > 0.0:
                    imb = abs(pre - (total - pre - wv))
                    if imb < best_imb:
                        best_imb = imb
                        best_val = vals[i]
                pre += wv
            out[y, x] = best_val
    return out


@numba.njit(cache=True)
def chart_flood_kernel(nbr, xs, ys, pos, front_bits, order,
                       w, h, max_size, edge_exclusion):
    """Seeded breadth-first chart growth over pixel connections.

    Constraints per accepted pixel: ownership is exclusive, a chart never
    covers a lattice position twice, its bbox stays within max_size, and
    positions across a depth edge from a front-side member are reserved
    for other charts.  Returns (chart id per pixel, acceptance rank).
    """
    k = nbr.shape[1]
    owned = np.full(k, -1, dtype=np.int32)
    rank = np.zeros(k, dtype=np.int64)
    occ_stamp = np.full(w * h, -1, dtype=np.int32)
    block_stamp = np.full(w * h, -1, dtype=np.int32)
    queue = np.empty(k, dtype=np.int64)
    # direction offsets follow the nbr row order (up, down, left, right)
    dxs = (0, 0, -1, 1)
    dys = (-1, 1, 0, 0)

    n_charts = 0
    for s in range(k):
        seed = order[s]
        if owned[seed] >= 0:
            continue
        cid = n_charts
        n_charts += 1
        owned[seed] = cid
        occ_stamp[pos[seed]] = cid
        bx0 = bx1 = xs[seed]
        by0 = by1 = ys[seed]
        queue[0] = seed
        head, tail = 0, 1
        r = 0
        rank[seed] = 0
        fb = front_bits[seed]
        if fb:
            for di in range(4):
                if fb & (1 << di):
                    for step in range(1, edge_exclusion + 1):
                        tx = xs[seed] + dxs[di] * step
                        ty = ys[seed] + dys[di] * step
                        if 0 <= tx < w and 0 <= ty < h:
                            block_stamp[ty * w + tx] = cid
        while head < tail:
            p = queue[head]
            head += 1
            for di in range(4):
                q = nbr[di, p]
                if q < 0 or owned[q] >= 0:
                    continue
                qp = pos[q]
                if occ_stamp[qp] == cid or block_stamp[qp] == cid:
                    continue
                nx0 = min(bx0, xs[q])
                nx1 = max(bx1, xs[q])
                ny0 = min(by0, ys[q])
                ny1 = max(by1, ys[q])
                if nx1 - nx0 >= max_size or ny1 - ny0 >= max_size:
                    continue
                bx0, bx1, by0, by1 = nx0, nx1, ny0, ny1
                owned[q] = cid
                occ_stamp[qp] = cid
                r += 1
                rank[q] = r
                queue[tail] = q
                tail += 1
                # exclusion marks apply the moment a front-side pixel joins
                fb = front_bits[q]
                if fb:
                    for di2 in range(4):
                        if fb & (1 << di2):
                            for step in range(1, edge_exclusion + 1):
                                tx = xs[q] + dxs[di2] * step
                                ty = ys[q] + dys[di2] * step
                                if 0 <= tx < w and 0 <= ty < h:
                                    block_stamp[ty * w + tx] = cid
    return owned, rank
