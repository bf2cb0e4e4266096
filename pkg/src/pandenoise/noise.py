"""Synthetic degradations for controlled denoising experiments.

Five cases, on cubes normalised to [0, 1]:

1. i.i.d. Gaussian noise, ``sigma = 10/255``;
2. band-wise Gaussian noise, ``sigma_b ~ U[5/255, 30/255]``;
3. case 2 plus salt-and-pepper impulses on a random third of the bands;
4. case 2 plus column stripes on a random third of the bands;
5. case 2 plus both impulses and stripes.

Randomness comes from independent PCG64 sub-streams keyed by
``(seed, stream id[, band])``, so each corruption type is reproducible on
its own and the Gaussian part of cases 3-5 equals case 2 for a given seed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

# sub-stream identifiers; changing these changes every simulated cube
_SIGMA, _GAUSS, _IMP_BANDS, _IMP_RATIO, _IMP_PIX, _STR_BANDS, _STR_RATIO, _STR_COLS = range(8)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Counter-style PCG64 generator for ``(seed, *key)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *key])))


@dataclass
class NoiseSpec:
    case_id: int
    seed: int = 0
    sigma_iid: float = 10 / 255
    sigma_range: tuple[float, float] = (5 / 255, 30 / 255)
    affected_fraction: float = 1 / 3
    impulse_ratio_range: tuple[float, float] = (0.05, 0.30)
    stripe_ratio_range: tuple[float, float] = (0.05, 0.30)
    stripe_amplitude_range: tuple[float, float] = (-0.25, 0.25)

    def __post_init__(self):
        for name in ("sigma_range", "impulse_ratio_range", "stripe_ratio_range",
                     "stripe_amplitude_range"):
            setattr(self, name, tuple(float(v) for v in getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        if self.case_id not in (1, 2, 3, 4, 5):
            raise ValueError(f"unknown noise case {self.case_id}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a nonnegative 64-bit integer")
        if self.sigma_iid < 0:
            raise ValueError("sigma_iid must be nonnegative")
        for name in ("sigma_range", "impulse_ratio_range", "stripe_ratio_range",
                     "stripe_amplitude_range"):
            rng = getattr(self, name)
            if len(rng) != 2 or rng[0] > rng[1]:
                raise ValueError(f"{name} must be an ordered pair, got {rng}")
        if self.sigma_range[0] < 0:
            raise ValueError("sigma_range must be nonnegative")
        for name in ("impulse_ratio_range", "stripe_ratio_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi > 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 <= self.affected_fraction <= 1:
            raise ValueError("affected_fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "NoiseSpec":
        return cls.from_dict(json.loads(text))


@dataclass
class MaskReport:
    """Where each corruption landed."""

    shape: tuple[int, int, int]
    sigmas: np.ndarray
    impulse_bands: list[int] = field(default_factory=list)
    impulse_ratios: list[float] = field(default_factory=list)
    impulse_mask: np.ndarray | None = None
    stripe_bands: list[int] = field(default_factory=list)
    stripe_ratios: list[float] = field(default_factory=list)
    stripe_columns: dict[int, list[int]] = field(default_factory=dict)
    stripe_offsets: dict[int, list[float]] = field(default_factory=dict)

    def summary(self) -> dict:
        rows, cols, _ = self.shape
        imp_counts = (
            [int(self.impulse_mask[:, :, b].sum()) for b in self.impulse_bands]
            if self.impulse_mask is not None else []
        )
        return {
            "shape": list(self.shape),
            "sigmas": [float(s) for s in self.sigmas],
            "impulse_bands": list(self.impulse_bands),
            "impulse_ratios": list(self.impulse_ratios),
            "impulse_pixel_counts": imp_counts,
            "impulse_pixels_per_band": rows * cols,
            "stripe_bands": list(self.stripe_bands),
            "stripe_ratios": list(self.stripe_ratios),
            "stripe_columns": {str(b): c for b, c in self.stripe_columns.items()},
            "stripe_offsets": {str(b): o for b, o in self.stripe_offsets.items()},
        }


def affected_band_count(bands: int, fraction: float = 1 / 3) -> int:
    # round half up, not banker's rounding
    return int(np.floor(bands * fraction + 0.5))


def _pick_bands(seed: int, stream: int, bands: int, fraction: float) -> list[int]:
    n = affected_band_count(bands, fraction)
    return sorted(substream(seed, stream).choice(bands, size=n, replace=False).tolist())


def gaussian_component(shape, spec: NoiseSpec) -> tuple[np.ndarray, np.ndarray]:
    """Additive Gaussian noise and the per-band standard deviations used."""
    rows, cols, bands = shape
    if spec.case_id == 1:
        sigmas = np.full(bands, spec.sigma_iid)
    else:
        lo, hi = spec.sigma_range
        sigmas = substream(spec.seed, _SIGMA).uniform(lo, hi, size=bands)
    noise = np.empty(shape)
    for b in range(bands):
        noise[:, :, b] = sigmas[b] * substream(spec.seed, _GAUSS, b).standard_normal((rows, cols))
    return noise, sigmas


def corrupt(X, spec: NoiseSpec) -> tuple[np.ndarray, MaskReport]:
    """Apply the degradation described by ``spec`` to a clean cube in [0, 1].

    Gaussian noise is added first, then stripes, then impulses, so impulse
    pixels hold exactly 0 or 1. Values are not clipped.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise ValueError(f"expected a 3-D cube, got shape {X.shape}")
    if not np.all(np.isfinite(X)) or X.min() < 0 or X.max() > 1:
        raise ValueError("clean cube must be finite and lie in [0, 1]")
    spec.validate()
    rows, cols, bands = X.shape

    noise, sigmas = gaussian_component(X.shape, spec)
    Y = X + noise
    report = MaskReport(shape=X.shape, sigmas=sigmas)

    if spec.case_id in (4, 5):
        sb = _pick_bands(spec.seed, _STR_BANDS, bands, spec.affected_fraction)
        ratios = substream(spec.seed, _STR_RATIO).uniform(*spec.stripe_ratio_range, size=len(sb))
        lo, hi = spec.stripe_amplitude_range
        for b, p in zip(sb, ratios):
            g = substream(spec.seed, _STR_COLS, b)
            n_cols = int(np.floor(p * cols + 0.5))
            chosen = np.sort(g.choice(cols, size=n_cols, replace=False))
            offsets = g.uniform(lo, hi, size=n_cols)
            Y[:, chosen, b] += offsets[None, :]
            report.stripe_columns[b] = chosen.tolist()
            report.stripe_offsets[b] = offsets.tolist()
        report.stripe_bands = sb
        report.stripe_ratios = ratios.tolist()

    if spec.case_id in (3, 5):
        ib = _pick_bands(spec.seed, _IMP_BANDS, bands, spec.affected_fraction)
        ratios = substream(spec.seed, _IMP_RATIO).uniform(*spec.impulse_ratio_range, size=len(ib))
        mask = np.zeros(X.shape, dtype=bool)
        for b, p in zip(ib, ratios):
            g = substream(spec.seed, _IMP_PIX, b)
            hit = g.random((rows, cols)) < p
            salt = g.random((rows, cols)) < 0.5
            Y[:, :, b][hit] = salt[hit].astype(np.float64)
            mask[:, :, b] = hit
        report.impulse_bands = ib
        report.impulse_ratios = ratios.tolist()
        report.impulse_mask = mask

    return Y, report
