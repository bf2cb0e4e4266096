"""Numerical kernels used by the ADMM solver."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .tensor import fold3, unfold3

log = logging.getLogger(__name__)


@dataclass
class FactorPair:
    """Low-rank factors ``X = unfold3^-1(unfold3(U) @ V.T)``.

    Attributes
    ----------
    U : ndarray, shape (rows, cols, R)
        Representation coefficients, one spatial map per slice.
    V : ndarray, shape (bands, R)
        Orthonormal spectral basis.
    singular_values : ndarray or None
        Leading singular values of the matrix the pair was initialised from.
    """

    U: np.ndarray
    V: np.ndarray
    singular_values: np.ndarray | None = None

    @property
    def rank(self) -> int:
        return self.V.shape[1]

    def reconstruct(self) -> np.ndarray:
        rows, cols, _ = self.U.shape
        return fold3(unfold3(self.U) @ self.V.T, rows, cols)


def truncated_svd_init(Y: np.ndarray, rank: int, rows: int, cols: int) -> FactorPair:
    """Rank-``rank`` truncated SVD of the unfolded cube ``Y`` (``MN x B``).

    Uses the eigendecomposition of the ``B x B`` Gram matrix, which is cheap
    when there are far more pixels than bands. Column signs of ``V`` are
    fixed so that the largest-magnitude entry of each column is positive.
    """
    Y = np.asarray(Y, dtype=np.float64)
    n, b = Y.shape
    if n != rows * cols:
        raise ValueError(f"Y has {n} rows, expected {rows * cols}")
    if not 1 <= rank <= min(n, b):
        raise ValueError(f"rank must be in [1, {min(n, b)}], got {rank}")
    evals, evecs = np.linalg.eigh(Y.T @ Y)
    order = np.argsort(evals)[::-1][:rank]
    V = evecs[:, order]
    pivot = np.argmax(np.abs(V), axis=0)
    V = V * np.sign(V[pivot, np.arange(rank)])
    sv = np.sqrt(np.clip(evals[order], 0.0, None))
    U = fold3(Y @ V, rows, cols)
    return FactorPair(U=U, V=V, singular_values=sv)


def soft_threshold(x, alpha: float) -> np.ndarray:
    """``sign(x) * max(|x| - alpha, 0)``."""
    if alpha < 0:
        raise ValueError(f"threshold must be nonnegative, got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - alpha, 0.0)


def weighted_soft_threshold(x, alpha: float, w) -> np.ndarray:
    """``sign(x) * max(|x| - alpha * w, 0)``, the prox of ``alpha * sum(w |t|)``."""
    if alpha < 0:
        raise ValueError(f"threshold must be nonnegative, got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != x.shape:
        raise ValueError(f"weight shape {w.shape} does not match input {x.shape}")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    return np.sign(x) * np.maximum(np.abs(x) - alpha * w, 0.0)


@lru_cache(maxsize=16)
def difference_spectra(rows: int, cols: int):
    """Real-FFT spectra of the circular forward-difference kernels.

    Returns ``(Kh, Kv, denom)`` where ``denom = |Kh|^2 + |Kv|^2``. Each kernel
    has -1 at the origin and +1 at the wrapped neighbour, so multiplying by
    the spectrum reproduces :func:`pandenoise.tensor.gradient` exactly.
    """
    kh = np.zeros((rows, cols))
    kh[0, 0] -= 1.0
    kh[0, -1] += 1.0
    kv = np.zeros((rows, cols))
    kv[0, 0] -= 1.0
    kv[-1, 0] += 1.0
    Kh = np.fft.rfft2(kh)
    Kv = np.fft.rfft2(kv)
    denom = np.abs(Kh) ** 2 + np.abs(Kv) ** 2
    for a in (Kh, Kv, denom):
        a.setflags(write=False)
    return Kh, Kv, denom


def solve_u(rhs_data, F_h, F_v, G_h, G_v, mu: float) -> np.ndarray:
    """Solve ``(mu I + mu sum_j D_j^T D_j) u = rhs_data + sum_j D_j^T (mu F_j - G_j)``.

    All arrays are ``rows x cols x R``; each slice is solved independently
    in the Fourier domain. ``rhs_data`` is the already-projected data term
    ``(mu (Y - E - S) + Gamma) V`` folded back to a tensor.
    """
    if not mu > 0:
        raise ValueError(f"penalty mu must be positive, got {mu}")
    shapes = {np.shape(a) for a in (rhs_data, F_h, F_v, G_h, G_v)}
    if len(shapes) != 1:
        raise ValueError(f"solve_u inputs differ in shape: {sorted(shapes)}")
    rows, cols = np.shape(rhs_data)[:2]
    Kh, Kv, denom = difference_spectra(rows, cols)
    if np.ndim(rhs_data) == 3:
        Kh, Kv, denom = Kh[..., None], Kv[..., None], denom[..., None]
    axes = (0, 1)
    num = np.fft.rfft2(rhs_data, axes=axes)
    num += np.conj(Kh) * np.fft.rfft2(mu * np.asarray(F_h) - G_h, axes=axes)
    num += np.conj(Kv) * np.fft.rfft2(mu * np.asarray(F_v) - G_v, axes=axes)
    return np.fft.irfft2(num / (mu + mu * denom), s=(rows, cols), axes=axes)


class DegenerateProcrustesError(ValueError):
    """Raised when ``Q^T U`` vanishes and no fallback basis is available."""


def procrustes_v(Q, U, fallback: np.ndarray | None = None) -> np.ndarray:
    """Orthonormal ``V`` minimising ``||Q - U V^T||_F``.

    ``Q`` is ``MN x B`` and ``U`` is ``MN x R``. With ``Q^T U = B C D^T`` the
    minimiser is ``B D^T``. If ``Q^T U`` is exactly zero the problem has no
    unique answer: ``fallback`` is returned when given, otherwise
    :class:`DegenerateProcrustesError` is raised.
    """
    Q = np.asarray(Q, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    if Q.ndim != 2 or U.ndim != 2 or Q.shape[0] != U.shape[0]:
        raise ValueError(f"incompatible shapes Q {Q.shape}, U {U.shape}")
    M = Q.T @ U
    if not np.any(M):
        if fallback is None:
            raise DegenerateProcrustesError("Q^T U is identically zero")
        log.warning("degenerate Procrustes step; keeping previous basis")
        return np.array(fallback, dtype=np.float64, copy=True)
    B, _, Dt = np.linalg.svd(M, full_matrices=False)
    return B @ Dt
