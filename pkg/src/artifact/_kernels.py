"""Compiled inner loops (2x2 cocycle products)."""
import numpy as np
from numba import njit


@njit(cache=True)
def qr_log_diagonals(mats, Q0):
    """Reorthonormalised product of 2x2 matrices; returns log|R_ii| per step and final Q."""
    n = mats.shape[0]
    out = np.empty((n, 2))
    q00, q10, q01, q11 = Q0[0, 0], Q0[1, 0], Q0[0, 1], Q0[1, 1]
    for k in range(n):
        a, b, c, d = mats[k, 0, 0], mats[k, 0, 1], mats[k, 1, 0], mats[k, 1, 1]
        x0 = a * q00 + b * q10
        y0 = c * q00 + d * q10
        r11 = np.sqrt(x0 * x0 + y0 * y0)
        # |r22| follows from det(A Q) = det(Q') r11 r22 with orthonormal Q, Q'
        det = a * d - b * c
        out[k, 0] = np.log(r11)
        out[k, 1] = np.log(abs(det) / r11)
        q00, q10 = x0 / r11, y0 / r11
        q01, q11 = -q10, q00
    Q = np.empty((2, 2))
    Q[0, 0], Q[1, 0], Q[0, 1], Q[1, 1] = q00, q10, q01, q11
    return out, Q


@njit(cache=True)
def push_forward_normalised(mats, v0):
    """Directions ``v_k`` with ``v_{k+1} ∝ mats[k] v_k``; returns directions and log growth."""
    n = mats.shape[0]
    dirs = np.empty((n + 1, 2))
    logs = np.empty(n)
    x, y = v0[0], v0[1]
    nr = np.sqrt(x * x + y * y)
    x /= nr
    y /= nr
    dirs[0, 0], dirs[0, 1] = x, y
    for k in range(n):
        a, b, c, d = mats[k, 0, 0], mats[k, 0, 1], mats[k, 1, 0], mats[k, 1, 1]
        nx = a * x + b * y
        ny = c * x + d * y
        nr = np.sqrt(nx * nx + ny * ny)
        logs[k] = np.log(nr)
        x, y = nx / nr, ny / nr
        dirs[k + 1, 0], dirs[k + 1, 1] = x, y
    return dirs, logs
