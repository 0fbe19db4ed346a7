"""Numba kernels for the occupation-time dynamic program.

The walk distribution is fully symmetric under the 48 signed coordinate
permutations, so the DP state lives on the wedge ``0 <= i <= j <= k <= L``
stored as ``P[k, j, i]`` (i contiguous).  One extra padding plane at ``L + 1``
absorbs mass leaving the box.  Neighbor reads are canonicalized by sorting
absolute coordinates; the sort is resolved per row so the hot inner loop over
``i`` is a plain six-point stencil the compiler can vectorize.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def dp_green_wedge(horizon, box_radius):
    """Accumulated occupation sums of SRW started at 0, absorbed outside the box.

    Returns the wedge array ``G[k, j, i] = sum_{t<=horizon} P(S_t = (i,j,k))``
    for ``0 <= i <= j <= k <= box_radius``.
    """
    L = box_radius
    n = L + 2
    P = np.zeros((n, n, n))
    Q = np.zeros((n, n, n))
    G = np.zeros((n, n, n))
    P[0, 0, 0] = 1.0
    G[0, 0, 0] = 1.0
    for t in range(1, horizon + 1):
        reach = min(t, L)
        par = t & 1
        for k in range(reach + 1):
            for j in range(k + 1):
                i0 = 0 if ((j + k) & 1) == par else 1
                row = P[k, j]
                if j == 0:
                    # only the cell (0, 0, k) lives here
                    if i0 == 0:
                        if k == 0:
                            v = P[1, 0, 0]
                        else:
                            v = (4.0 * P[k, 1, 0] + P[k - 1, 0, 0] + P[k + 1, 0, 0]) / 6.0
                        Q[k, 0, 0] = v
                        G[k, 0, 0] += v
                    continue
                if j == k:
                    # (i, k, k): the two j/k-direction neighbor pairs coincide
                    ra = P[k, k - 1]
                    rb = P[k + 1, k]
                    start = i0
                    if i0 == 0:
                        v = (2.0 * row[1] + 2.0 * ra[0] + 2.0 * rb[0]) / 6.0
                        Q[k, k, 0] = v
                        G[k, k, 0] += v
                        start = 2
                    for i in range(start, k, 2):
                        v = (row[i - 1] + row[i + 1] + 2.0 * ra[i] + 2.0 * rb[i]) / 6.0
                        Q[k, k, i] = v
                        G[k, k, i] += v
                    if ((k - i0) & 1) == 0:
                        v = (3.0 * row[k - 1] + 3.0 * P[k + 1, k, k]) / 6.0
                        Q[k, k, k] = v
                        G[k, k, k] += v
                    continue
                rjm = P[k, j - 1]
                rjp = P[k, j + 1]
                rkm = P[k - 1, j]
                rkp = P[k + 1, j]
                start = i0
                if i0 == 0:
                    v = (2.0 * row[1] + rjm[0] + rjp[0] + rkm[0] + rkp[0]) / 6.0
                    Q[k, j, 0] = v
                    G[k, j, 0] += v
                    start = 2
                for i in range(start, j, 2):
                    v = (row[i - 1] + row[i + 1] + rjm[i] + rjp[i] + rkm[i] + rkp[i]) / 6.0
                    Q[k, j, i] = v
                    G[k, j, i] += v
                if ((j - i0) & 1) == 0:
                    v = (2.0 * row[j - 1] + 2.0 * rjp[j] + rkm[j] + rkp[j]) / 6.0
                    Q[k, j, j] = v
                    G[k, j, j] += v
        tmp = P
        P = Q
        Q = tmp
    return G
