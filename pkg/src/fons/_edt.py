"""Exact periodic squared Euclidean distance transform on a lattice.

Separable lower-envelope-of-parabolas transform (Felzenszwalb and
Huttenlocher) applied axis by axis.  Each 1-D line is unrolled over three
periods so the nearest image of every parabola is inside the window.
"""

import warnings

import numba
import numpy as np

# an old system TBB only disables that threading layer; numba falls back quietly
warnings.filterwarnings("ignore", message="The TBB threading layer", category=numba.NumbaWarning)


@numba.njit(cache=True)
def _line(f, out, v, z):
    n = f.shape[0]
    k = -1
    for q in range(3 * n):
        fq = f[q % n]
        if fq == np.inf:
            continue
        qf = float(q)
        while k >= 0:
            vk = float(v[k])
            s = ((fq + qf * qf) - (f[v[k] % n] + vk * vk)) / (2.0 * (qf - vk))
            if s <= z[k]:
                k -= 1
            else:
                break
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
            z[1] = np.inf
        else:
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = np.inf
    if k < 0:
        for p in range(n):
            out[p] = np.inf
        return
    j = 0
    for p in range(n, 2 * n):
        while z[j + 1] < p:
            j += 1
        dp = float(p - v[j])
        out[p - n] = dp * dp + f[v[j] % n]


@numba.njit(parallel=True, cache=True)
def _pass(rows):
    m, n = rows.shape
    out = np.empty_like(rows)
    for i in numba.prange(m):
        v = np.empty(3 * n, dtype=np.int64)
        z = np.empty(3 * n + 1, dtype=np.float64)
        _line(rows[i], out[i], v, z)
    return out


def squared_distance(mask: np.ndarray) -> np.ndarray:
    """Squared torus distance, in node units, from every node to the mask.

    Returns ``inf`` everywhere for an empty mask.
    """
    g = np.where(mask, 0.0, np.inf)
    for axis in range(mask.ndim):
        moved = np.moveaxis(g, axis, -1)
        shape = moved.shape
        rows = np.ascontiguousarray(moved).reshape(-1, shape[-1])
        g = np.moveaxis(_pass(rows).reshape(shape), -1, axis)
    return np.ascontiguousarray(g)
