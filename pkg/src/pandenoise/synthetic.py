"""Synthetic low-rank scenes with a matching noiseless PAN image."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .tensor import PanImage, normalize_pan


def abundance_maps(rows: int, cols: int, rank: int, seed: int = 0, edge_blur: float = 0.0) -> np.ndarray:
    """``rows x cols x rank`` piecewise-smooth maps: soft bumps plus a few sharp shapes."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:rows, 0:cols].astype(np.float64)
    maps = np.empty((rows, cols, rank))
    for r in range(rank):
        m = np.zeros((rows, cols))
        for _ in range(3):
            cy, cx = rng.uniform(0, rows), rng.uniform(0, cols)
            s = rng.uniform(0.15, 0.35) * min(rows, cols)
            m += rng.uniform(0.3, 1.0) * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s * s))
        for _ in range(4):
            if rng.random() < 0.5:
                y0, x0 = rng.integers(0, rows), rng.integers(0, cols)
                h, w = rng.integers(rows // 8, rows // 3), rng.integers(cols // 8, cols // 3)
                shape = (yy >= y0) & (yy < y0 + h) & (xx >= x0) & (xx < x0 + w)
            else:
                cy, cx = rng.uniform(0, rows), rng.uniform(0, cols)
                rad = rng.uniform(0.08, 0.2) * min(rows, cols)
                shape = (yy - cy) ** 2 + (xx - cx) ** 2 < rad * rad
            m += rng.uniform(0.4, 1.0) * shape
        if edge_blur > 0:
            m = gaussian_filter(m, edge_blur, mode="wrap")
        maps[:, :, r] = m / m.max()
    return maps


def spectral_signatures(bands: int, rank: int, seed: int = 0) -> np.ndarray:
    """``bands x rank`` smooth positive spectra."""
    rng = np.random.default_rng(seed + 7919)
    t = np.linspace(0.0, 1.0, bands)
    sig = np.empty((bands, rank))
    for r in range(rank):
        c = rng.uniform(0.1, 0.9, size=2)
        w = rng.uniform(0.1, 0.4, size=2)
        a = rng.uniform(0.3, 1.0, size=2)
        sig[:, r] = 0.15 + sum(a[i] * np.exp(-((t - c[i]) ** 2) / (2 * w[i] ** 2)) for i in range(2))
    return sig


def lowrank_scene(rows: int, cols: int, bands: int, rank: int = 4, seed: int = 0):
    """A clean cube in [0.05, 0.95] of exact rank ``rank`` and its band-mean PAN.

    Returns ``(cube, pan)``.
    """
    A = abundance_maps(rows, cols, rank, seed)
    S = spectral_signatures(bands, rank, seed)
    cube = np.einsum("ijr,br->ijb", A, S)
    cube = 0.05 + 0.9 * (cube - cube.min()) / (cube.max() - cube.min())
    # the affine rescale adds a constant spectrum, which can lift the rank by one
    cube = _project_rank(cube, rank)
    cube = np.clip(cube, 0.0, 1.0)
    return cube, band_mean_pan(cube)


def _project_rank(cube: np.ndarray, rank: int) -> np.ndarray:
    rows, cols, bands = cube.shape
    M = cube.reshape(-1, bands)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    return ((U[:, :rank] * s[:rank]) @ Vt[:rank]).reshape(rows, cols, bands)


def band_mean_pan(cube) -> PanImage:
    return normalize_pan(np.asarray(cube).mean(axis=2))
