"""Independent brute-force references used by several test modules."""
from __future__ import annotations

import numpy as np


def incremental_objective(A, tau0, mm, mp, U):
    """``<A u, u> - <tau0, u> + R(u)`` for the rows of ``U``."""
    U = np.atleast_2d(U)
    quad = np.einsum("ki,ij,kj->k", U, A, U)
    R = np.sum(mp * np.maximum(U, 0) + mm * np.maximum(-U, 0), axis=1)
    return quad - U @ tau0 + R


def grid_minimize_3(A, tau0, mm, mp, half_width=0.5, h=2e-3):
    """Exact minimum of the incremental objective over the grid ``h Z^3`` in a cube.

    The first two coordinates are enumerated; along the third the objective is
    a convex parabola plus a kink, so its best grid value is attained at one of
    the two grid neighbours of the continuous minimiser.
    """
    g = np.arange(-half_width, half_width + 0.5 * h, h)
    U1, U2 = np.meshgrid(g, g, indexing="ij")
    a = A[2, 2]
    b = 2 * (A[0, 2] * U1 + A[1, 2] * U2) - tau0[2]
    # continuous minimiser of a u^2 + b u + R_3(u)
    u3 = np.where(-b > mp[2], (-b - mp[2]) / (2 * a),
                  np.where(-b < -mm[2], (-b + mm[2]) / (2 * a), 0.0))
    best_val, best_u = np.inf, None
    for r in (np.floor, np.ceil):
        idx = np.clip(r((u3 + half_width) / h), 0, g.size - 1).astype(int)
        cand = np.stack([U1.ravel(), U2.ravel(), g[idx].ravel()], axis=1)
        vals = incremental_objective(A, tau0, mm, mp, cand)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val, best_u = vals[j], cand[j]
    return best_u, float(best_val)
