"""Cube and PAN data model, circular gradients, and mode-3 unfolding.

Unfolding order
---------------
``unfold3`` maps a ``rows x cols x bands`` cube to a ``(rows*cols) x bands``
matrix whose column ``b`` is band ``b`` flattened in column-major order
(pixel ``(r, c)`` lands in row ``r + c*rows``). ``fold3`` is its inverse.
The same order is used for the band-sequential payload of the native cube
format, so a band block on disk equals a column of the unfolded matrix.

Gradient convention
-------------------
``horizontal`` differences along columns (axis 1), ``vertical`` along rows
(axis 0). Both are forward differences with circular wrap, so the operators
are circulant and diagonalised by the 2-D FFT.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class GradientPair(NamedTuple):
    horizontal: np.ndarray
    vertical: np.ndarray


def _check_finite(x: np.ndarray, what: str = "input") -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{what} contains non-finite values")


@dataclass(frozen=True)
class HyperCube:
    """A ``rows x cols x bands`` real image cube (float64, finite)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"cube must be 3-D with positive dims, got shape {arr.shape}")
        _check_finite(arr, "cube")
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def band(self, b: int) -> np.ndarray:
        return self.data[:, :, b]

    def band_slices(self) -> list[np.ndarray]:
        return [self.data[:, :, b].copy() for b in range(self.bands)]

    @classmethod
    def from_bands(cls, slices) -> "HyperCube":
        return cls(np.stack(list(slices), axis=2))

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


@dataclass(frozen=True)
class PanImage:
    """A 2-D guidance image normalised to [0, 1].

    ``degenerate`` is set when the source was constant, in which case the
    normalised field is all zeros and carries no guidance.
    """

    data: np.ndarray
    degenerate: bool = field(default=False)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or min(arr.shape) < 1:
            raise ValueError(f"PAN must be 2-D with positive dims, got shape {arr.shape}")
        _check_finite(arr, "PAN")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("PAN values must lie in [0, 1]; use normalize_pan first")
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


def normalize_pan(image) -> PanImage:
    """Global min-max normalisation of a 2-D field into a :class:`PanImage`."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"PAN must be 2-D, got shape {arr.shape}")
    _check_finite(arr, "PAN")
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return PanImage(np.zeros_like(arr), degenerate=True)
    out = (arr - lo) / (hi - lo)
    # guard against rounding slightly outside the unit interval
    return PanImage(np.clip(out, 0.0, 1.0))


def gradient(image) -> GradientPair:
    """Forward differences with circular wrap.

    Works on 2-D fields and slice-wise on 3-D stacks (spatial axes 0 and 1).
    """
    x = np.asarray(image, dtype=np.float64)
    if x.ndim < 2:
        raise ValueError("gradient needs at least a 2-D field")
    _check_finite(x)
    gh = np.roll(x, -1, axis=1) - x
    gv = np.roll(x, -1, axis=0) - x
    return GradientPair(gh, gv)


def divergence(g: GradientPair) -> np.ndarray:
    """Adjoint of :func:`gradient`, i.e. ``gradient^T g``.

    Sign convention follows the adjoint, so ``divergence(gradient(x))`` is the
    positive semi-definite circular Laplacian ``-Δx``.
    """
    gh = np.asarray(g.horizontal, dtype=np.float64)
    gv = np.asarray(g.vertical, dtype=np.float64)
    if gh.shape != gv.shape:
        raise ValueError(f"gradient components differ in shape: {gh.shape} vs {gv.shape}")
    _check_finite(gh)
    _check_finite(gv)
    return (np.roll(gh, 1, axis=1) - gh) + (np.roll(gv, 1, axis=0) - gv)


def unfold3(cube) -> np.ndarray:
    """Mode-3 unfolding to a ``(rows*cols) x bands`` matrix (column-major pixels)."""
    x = np.asarray(cube)
    if x.ndim != 3:
        raise ValueError(f"unfold3 expects a 3-D array, got shape {x.shape}")
    rows, cols, bands = x.shape
    return x.reshape(rows * cols, bands, order="F")


def fold3(matrix, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`unfold3`."""
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != rows * cols:
        raise ValueError(
            f"cannot fold matrix of shape {m.shape} into {rows} x {cols} x bands"
        )
    return m.reshape(rows, cols, m.shape[1], order="F")


def _bilinear_axis(n_src: int, n_dst: int):
    # pixel-centre alignment, clamped at the borders
    pos = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
    pos = np.clip(pos, 0.0, n_src - 1)
    i0 = np.floor(pos).astype(int)
    i1 = np.minimum(i0 + 1, n_src - 1)
    return i0, i1, pos - i0


def pan_resample(pan, target_rows: int, target_cols: int) -> PanImage:
    """Bring a PAN image onto a cube's spatial grid and normalise it.

    Integer downsampling ratios use block averaging; any other ratio uses
    bilinear interpolation at pixel centres. Upsampling is refused.
    """
    src = np.asarray(pan, dtype=np.float64)
    if src.ndim != 2:
        raise ValueError(f"PAN must be 2-D, got shape {src.shape}")
    h, w = src.shape
    if target_rows < 1 or target_cols < 1:
        raise ValueError("target dims must be positive")
    if target_rows > h or target_cols > w:
        raise ValueError(
            f"target grid {target_rows}x{target_cols} is larger than PAN {h}x{w}"
        )
    if h % target_rows == 0 and w % target_cols == 0:
        fr, fc = h // target_rows, w // target_cols
        out = src.reshape(target_rows, fr, target_cols, fc).mean(axis=(1, 3))
    else:
        r0, r1, tr = _bilinear_axis(h, target_rows)
        c0, c1, tc = _bilinear_axis(w, target_cols)
        top = src[r0][:, c0] * (1 - tc) + src[r0][:, c1] * tc
        bot = src[r1][:, c0] * (1 - tc) + src[r1][:, c1] * tc
        out = top * (1 - tr)[:, None] + bot * tr[:, None]
    return normalize_pan(out)
