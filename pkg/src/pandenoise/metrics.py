"""Full-reference quality metrics for cubes on a unit data range.

PSNR and SSIM are averaged over bands. ERGAS uses a resolution ratio of 1
and is normalised by the *reference* band means, so it is not symmetric.
SAM is the mean per-pixel spectral angle in degrees.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

DATA_RANGE = 1.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03


def _pair(x, ref) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {ref.shape}")
    if x.ndim == 2:
        x, ref = x[..., None], ref[..., None]
    if x.ndim != 3:
        raise ValueError(f"expected 2-D or 3-D arrays, got {x.ndim}-D")
    return x, ref


def psnr_per_band(x, ref) -> np.ndarray:
    x, ref = _pair(x, ref)
    mse = np.mean((x - ref) ** 2, axis=(0, 1))
    out = np.full(mse.shape, np.inf)
    nz = mse > 0
    out[nz] = 10.0 * np.log10(DATA_RANGE**2 / mse[nz])
    return out


def psnr(x, ref) -> float:
    """Mean over bands of ``10 log10(1 / MSE_b)``; ``inf`` for identical inputs."""
    return float(np.mean(psnr_per_band(x, ref)))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalised 1-D Gaussian taps; the 2-D window is their outer product."""
    t = np.arange(size) - (size - 1) / 2
    g = np.exp(-(t**2) / (2 * sigma**2))
    return g / g.sum()


def ssim_band(x: np.ndarray, ref: np.ndarray) -> float:
    """SSIM of one band, averaged over all fully-inside window positions."""
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"image {x.shape} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    g = gaussian_window()
    r = SSIM_WINDOW // 2

    def blur(a):
        a = correlate1d(a, g, axis=0, mode="reflect")
        a = correlate1d(a, g, axis=1, mode="reflect")
        return a[r:-r, r:-r]

    c1 = (SSIM_K1 * DATA_RANGE) ** 2
    c2 = (SSIM_K2 * DATA_RANGE) ** 2
    mx, my = blur(x), blur(ref)
    sxx = blur(x * x) - mx * mx
    syy = blur(ref * ref) - my * my
    sxy = blur(x * ref) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim_per_band(x, ref) -> np.ndarray:
    x, ref = _pair(x, ref)
    return np.array([ssim_band(x[:, :, b], ref[:, :, b]) for b in range(x.shape[2])])


def ssim(x, ref) -> float:
    return float(np.mean(ssim_per_band(x, ref)))


def rmse_per_band(x, ref) -> np.ndarray:
    x, ref = _pair(x, ref)
    return np.sqrt(np.mean((x - ref) ** 2, axis=(0, 1)))


def ergas(x, ref) -> float:
    """``100 sqrt(mean_b (RMSE_b / mean(ref_b))^2)``."""
    x, ref = _pair(x, ref)
    means = np.mean(ref, axis=(0, 1))
    if np.any(means == 0):
        bad = np.flatnonzero(means == 0).tolist()
        raise ValueError(f"ERGAS undefined: reference bands {bad} have zero mean")
    rel = rmse_per_band(x, ref) / means
    return float(100.0 * np.sqrt(np.mean(rel**2)))


def sam_map(x, ref) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel spectral angle in degrees and the mask of pixels it is defined on."""
    x, ref = _pair(x, ref)
    nx = np.linalg.norm(x, axis=2)
    nr = np.linalg.norm(ref, axis=2)
    valid = (nx > 0) & (nr > 0)
    ang = np.zeros(nx.shape)
    ux = x[valid] / nx[valid][:, None]
    ur = ref[valid] / nr[valid][:, None]
    # half-angle form: exact zero for parallel spectra, accurate near 0 and 180
    ang[valid] = 2.0 * np.arctan2(
        np.linalg.norm(ux - ur, axis=1), np.linalg.norm(ux + ur, axis=1)
    )
    return np.degrees(ang), valid


def sam(x, ref) -> float:
    """Mean spectral angle (degrees) over pixels where both spectra are nonzero."""
    ang, valid = sam_map(x, ref)
    if not valid.any():
        return math.nan
    return float(ang[valid].mean())


@dataclass
class MetricsReport:
    psnr: float
    ssim: float
    ergas: float
    sam: float
    psnr_per_band: list[float] = field(default_factory=list)
    ssim_per_band: list[float] = field(default_factory=list)
    rmse_per_band: list[float] = field(default_factory=list)
    sam_excluded_pixels: int = 0

    def row(self) -> tuple[float, float, float, float]:
        return (self.psnr, self.ssim, self.ergas, self.sam)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        # json has no inf literal in the standard; encode as strings
        def enc(v):
            if isinstance(v, float) and not math.isfinite(v):
                return str(v)
            if isinstance(v, list):
                return [enc(a) for a in v]
            return v

        return json.dumps({k: enc(v) for k, v in self.to_dict().items()}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        def dec(v):
            if isinstance(v, str):
                return float(v)
            if isinstance(v, list):
                return [dec(a) for a in v]
            return v

        return cls(**{k: dec(v) for k, v in json.loads(text).items()})


def evaluate(x, ref) -> MetricsReport:
    """All four metrics, in table order PSNR, SSIM, ERGAS, SAM."""
    _, valid = sam_map(x, ref)
    pb = psnr_per_band(x, ref)
    sb = ssim_per_band(x, ref)
    return MetricsReport(
        psnr=float(np.mean(pb)),
        ssim=float(np.mean(sb)),
        ergas=ergas(x, ref),
        sam=sam(x, ref),
        psnr_per_band=pb.tolist(),
        ssim_per_band=sb.tolist(),
        rmse_per_band=rmse_per_band(x, ref).tolist(),
        sam_excluded_pixels=int((~valid).sum()),
    )


# fixed-column table: a 16-char label then four 12-char right-aligned fields
LABEL_WIDTH = 16
COL_WIDTH = 12
TABLE_COLUMNS = ("PSNR", "SSIM", "ERGAS", "SAM")


def _fmt(v: float) -> str:
    if math.isinf(v):
        return ("inf" if v > 0 else "-inf").rjust(COL_WIDTH)
    return f"{v:{COL_WIDTH}.4f}"


def format_table(rows) -> str:
    """Render ``[(label, MetricsReport), ...]`` as a fixed-column text table."""
    lines = ["label".ljust(LABEL_WIDTH) + "".join(c.rjust(COL_WIDTH) for c in TABLE_COLUMNS)]
    for label, rep in rows:
        lab = str(label)[:LABEL_WIDTH].ljust(LABEL_WIDTH)
        lines.append(lab + "".join(_fmt(v) for v in rep.row()))
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> list[tuple[str, dict[str, float]]]:
    """Inverse of :func:`format_table` (values at 4-decimal precision)."""
    out = []
    for line in text.splitlines()[1:]:
        if not line.strip():
            continue
        label = line[:LABEL_WIDTH].strip()
        vals = {}
        for i, name in enumerate(TABLE_COLUMNS):
            start = LABEL_WIDTH + i * COL_WIDTH
            vals[name] = float(line[start:start + COL_WIDTH])
        out.append((label, vals))
    return out
