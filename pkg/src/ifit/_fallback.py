"""Pure-Python/numpy versions of the compiled kernels (same signatures, same results)."""

import math

import numpy as np


def knn_tricube(x, t, k, chunk=256):
    x = np.ascontiguousarray(x, dtype=float)
    t = np.ascontiguousarray(t, dtype=float)
    n = x.shape[0]
    k = min(int(k), n)
    out = np.empty((n, t.shape[1]))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        xi = x[start:stop]
        d2 = np.empty((stop - start, n))
        # direct differences keep d2 exactly comparable with the compiled loop
        for j in range(x.shape[1]):
            diff = x[None, :, j] - xi[:, None, j]
            if j == 0:
                np.multiply(diff, diff, out=d2)
            else:
                d2 += diff * diff
        dbar2 = np.partition(d2, k - 1, axis=1)[:, k - 1]
        for row in range(stop - start):
            db = dbar2[row]
            dr = d2[row]
            if db > 0.0:
                sel = np.flatnonzero(dr < db)
                ratio = np.sqrt(dr[sel] / db)
                w = (1.0 - ratio ** 3) ** 3
                out[start + row] = w @ t[sel] / w.sum()
            else:
                sel = np.flatnonzero(dr == 0.0)[:k]
                out[start + row] = t[sel].mean(axis=0)
    return out


def gillespie_mm(th1, th2, th3, e0, s0, c0, p0, grid, uniforms):
    m = len(grid)
    nu = len(uniforms)
    out = np.empty((4, m), dtype=np.int64)
    e, s, c, pr = int(e0), int(s0), int(c0), int(p0)
    t = 0.0
    j = 0
    used = 0
    grid = [float(g) for g in grid]
    while j < m:
        a1 = th1 * e * s
        a2 = th2 * c
        a3 = th3 * c
        a0 = a1 + a2 + a3
        if a0 <= 0.0:
            out[:, j:] = np.array([e, s, c, pr])[:, None]
            break
        if used >= nu:
            return out, -1
        tnew = t - math.log(1.0 - uniforms[used]) / a0
        used += 1
        while j < m and grid[j] < tnew:
            out[0, j] = e
            out[1, j] = s
            out[2, j] = c
            out[3, j] = pr
            j += 1
        if j >= m:
            break
        if used >= nu:
            return out, -1
        rr = uniforms[used] * a0
        used += 1
        if rr < a1:
            e -= 1
            s -= 1
            c += 1
        elif rr < a1 + a2:
            e += 1
            s += 1
            c -= 1
        else:
            e += 1
            c -= 1
            pr += 1
        t = tnew
    return out, used


def trait_dynamics(traits, weights, imm_cdf, gamma, u):
    npop = traits.shape[0]
    nt = weights.shape[0]
    counts = np.bincount(traits, minlength=nt).astype(np.int64)
    wcount = counts * weights
    for s in range(u.shape[0]):
        idx = min(int(u[s, 0] * npop), npop - 1)
        old = traits[idx]
        counts[old] -= 1
        wcount[old] -= weights[old]
        total = int(wcount.sum())
        if u[s, 1] < gamma or total <= 0:
            target = int(u[s, 2] * int(imm_cdf[-1]))
            new = int(np.searchsorted(imm_cdf, target, side="right"))
        else:
            target = int(u[s, 2] * total)
            new = int(np.searchsorted(np.cumsum(wcount), target, side="right"))
        traits[idx] = new
        counts[new] += 1
        wcount[new] += weights[new]
    return counts


def toad_paths(deltas, coin, pick, prob_return):
    nd = deltas.shape[0] + 1
    nt = deltas.shape[1]
    out = np.zeros((nd, nt))
    cols = np.arange(nt)
    for d in range(1, nd):
        ret = coin[d - 1] < prob_return
        back = np.minimum((pick[d - 1] * d).astype(np.int64), d - 1)
        out[d] = np.where(ret, out[back, cols], out[d - 1] + deltas[d - 1])
    return out
