"""PAN-derived weights for the weighted TV term on the coefficient maps."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.ndimage import uniform_filter

from .tensor import PanImage, gradient

DEFAULT_Q = 5.0
DEFAULT_CORR_WINDOW = 9


class Stage(str, Enum):
    STAGE1 = "stage1"
    STAGE2 = "stage2"
    UNIT = "unit"


@dataclass
class WeightField:
    """Per-direction, per-slice TV weights, each ``rows x cols x R``."""

    W_h: np.ndarray
    W_v: np.ndarray
    stage: Stage
    q: float
    corr_window: int | None = None

    @property
    def rank(self) -> int:
        return self.W_h.shape[2]


def _pan_array(pan) -> np.ndarray:
    p = np.asarray(pan, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError(f"PAN must be 2-D, got shape {p.shape}")
    if p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("PAN must be normalised to [0, 1]")
    return p


def pan_base_weights(pan, q: float) -> tuple[np.ndarray, np.ndarray]:
    """``(1 - |grad_j P|)^q`` for both directions, as 2-D fields."""
    if not q > 0:
        raise ValueError(f"weight exponent q must be positive, got {q}")
    gh, gv = gradient(_pan_array(pan))
    # |grad P| <= 1 for P in [0, 1]; clip absorbs rounding
    bh = np.clip(1.0 - np.abs(gh), 0.0, 1.0) ** q
    bv = np.clip(1.0 - np.abs(gv), 0.0, 1.0) ** q
    return bh, bv


def stage1_weights(pan: PanImage, q: float, rank: int) -> WeightField:
    """Spatial weights shared by every coefficient slice."""
    if rank < 1:
        raise ValueError(f"rank must be positive, got {rank}")
    bh, bv = pan_base_weights(pan, q)
    shape = bh.shape + (rank,)
    return WeightField(
        W_h=np.broadcast_to(bh[..., None], shape),
        W_v=np.broadcast_to(bv[..., None], shape),
        stage=Stage.STAGE1,
        q=q,
    )


def unit_weights(rows: int, cols: int, rank: int) -> WeightField:
    ones = np.broadcast_to(np.ones((1, 1, 1)), (rows, cols, rank))
    return WeightField(W_h=ones, W_v=ones, stage=Stage.UNIT, q=0.0)


def local_correlation(a, b, window: int = DEFAULT_CORR_WINDOW) -> np.ndarray:
    """Windowed Pearson correlation between two fields.

    ``a`` may be a ``rows x cols x R`` stack, in which case ``b`` (2-D) is
    correlated against every slice. Windows are ``window x window`` centred
    on each pixel with replicate padding at the borders. Windows in which
    either field has zero variance give 0.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be an odd positive integer, got {window}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[:2] != b.shape[:2] or b.ndim != 2 or a.ndim not in (2, 3):
        raise ValueError(f"incompatible shapes {a.shape} and {b.shape}")
    if a.ndim == 3:
        b = np.broadcast_to(b[..., None], a.shape)
        size = (window, window, 1)
    else:
        size = window

    # global centring keeps the moment differences well conditioned
    a = a - a.mean(axis=(0, 1), keepdims=True)
    b = b - b.mean(axis=(0, 1), keepdims=True)

    def box(x):
        return uniform_filter(x, size=size, mode="nearest")

    ma, mb = box(a), box(b)
    var_a = box(a * a) - ma * ma
    var_b = box(b * b) - mb * mb
    cov = box(a * b) - ma * mb

    eps = 1e-12
    flat_a = var_a <= eps * (box(a * a) + 1e-300)
    flat_b = var_b <= eps * (box(b * b) + 1e-300)
    valid = ~(flat_a | flat_b)
    out = np.zeros_like(cov)
    out[valid] = cov[valid] / np.sqrt(var_a[valid] * var_b[valid])
    return np.clip(out, -1.0, 1.0)


def correlation_maps(pan, U, window: int = DEFAULT_CORR_WINDOW):
    """Local correlation of each slice's gradient with the PAN gradient."""
    gph, gpv = gradient(_pan_array(pan))
    guh, guv = gradient(U)
    return local_correlation(guh, gph, window), local_correlation(guv, gpv, window)


def stage2_weights(pan: PanImage, U, q: float, window: int = DEFAULT_CORR_WINDOW) -> WeightField:
    """Slice-aware weights ``|R_j| * (1 - |grad_j P|)^q``."""
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 3 or U.shape[:2] != np.shape(pan):
        raise ValueError(f"U of shape {U.shape} does not match PAN {np.shape(pan)}")
    bh, bv = pan_base_weights(pan, q)
    rh, rv = correlation_maps(pan, U, window)
    return WeightField(
        W_h=np.abs(rh) * bh[..., None],
        W_v=np.abs(rv) * bv[..., None],
        stage=Stage.STAGE2,
        q=q,
        corr_window=window,
    )
