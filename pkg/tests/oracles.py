"""Independent reference computations shared by several test modules."""

import mpmath
import numpy as np


def difference_matrices(m, n):
    """Dense circulant forward-difference operators on row-major vec(x)."""
    N = m * n
    Dh = np.zeros((N, N))
    Dv = np.zeros((N, N))
    for i in range(m):
        for j in range(n):
            k = i * n + j
            Dh[k, k] -= 1
            Dh[k, i * n + (j + 1) % n] += 1
            Dv[k, k] -= 1
            Dv[k, ((i + 1) % m) * n + j] += 1
    return Dh, Dv


def windowed_pearson(a, b, i, j, window):
    """Pearson correlation over the window centred at (i, j), edge-replicated."""
    r = window // 2
    pa = np.pad(a, r, mode="edge")[i:i + window, j:j + window].ravel()
    pb = np.pad(b, r, mode="edge")[i:i + window, j:j + window].ravel()
    da, db = pa - pa.mean(), pb - pb.mean()
    den = np.sqrt(np.sum(da * da) * np.sum(db * db))
    return 0.0 if den == 0 else float(np.sum(da * db) / den)


def golden_prox(x, aw, iters=220):
    """Minimise aw*|t| + (t-x)^2/2 by golden-section search in 40-digit arithmetic."""
    mpmath.mp.dps = 40
    x, aw = mpmath.mpf(x), mpmath.mpf(aw)
    f = lambda t: aw * abs(t) + (t - x) ** 2 / 2
    lo, hi = -abs(x) - 1, abs(x) + 1
    invphi = (mpmath.sqrt(5) - 1) / 2
    c, d = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
    for _ in range(iters):
        if f(c) < f(d):
            hi, d = d, c
            c = hi - invphi * (hi - lo)
        else:
            lo, c = c, d
            d = lo + invphi * (hi - lo)
    return float((lo + hi) / 2)


def dense_u_solve(rhs, Fh, Fv, Gh, Gv, mu):
    m, n, R = rhs.shape
    Dh, Dv = difference_matrices(m, n)
    A = mu * np.eye(m * n) + mu * (Dh.T @ Dh + Dv.T @ Dv)
    out = np.empty_like(rhs)
    for i in range(R):
        b = (rhs[:, :, i].ravel() + Dh.T @ (mu * Fh[:, :, i] - Gh[:, :, i]).ravel()
             + Dv.T @ (mu * Fv[:, :, i] - Gv[:, :, i]).ravel())
        out[:, :, i] = np.linalg.solve(A, b).reshape(m, n)
    return out
