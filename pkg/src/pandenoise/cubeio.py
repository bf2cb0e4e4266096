"""Reading and writing cubes, PAN images and false-colour previews.

Native format
-------------
A JSON header next to a flat little-endian binary payload. The payload is
band-sequential: band 0 first, and inside each band pixels run down the
columns (row index fastest), which is exactly column ``b`` of
``unfold3(cube)``. Supported payload types are ``float32le`` and
``uint16le``; integer payloads are divided by ``scale`` on read.

ENVI ``.hdr`` + raw payloads (bsq/bil/bip) can be read but not written.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .tensor import HyperCube, PanImage, fold3, normalize_pan, pan_resample, unfold3

FORMAT_TAG = "pandenoise-cube"
DTYPES = {"float32le": np.dtype("<f4"), "uint16le": np.dtype("<u2")}
LAYOUTS = ("bsq",)
MAX_ELEMENTS = 2**40
PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class CubeFormatError(ValueError):
    """Malformed header, unknown type, or unreadable image."""


class TruncatedPayloadError(CubeFormatError):
    def __init__(self, path, expected: int, actual: int):
        super().__init__(f"{path}: payload has {actual} bytes, expected {expected}")
        self.expected = expected
        self.actual = actual


@dataclass
class CubeFileHeader:
    rows: int
    cols: int
    bands: int
    dtype: str = "float32le"
    layout: str = "bsq"
    scale: float | None = None
    data_file: str | None = None
    provenance: dict | None = None

    def __post_init__(self):
        for name in ("rows", "cols", "bands"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise CubeFormatError(f"{name} must be a positive integer, got {v!r}")
        if self.rows * self.cols * self.bands > MAX_ELEMENTS:
            raise CubeFormatError("declared cube dimensions overflow the supported size")
        if self.dtype not in DTYPES:
            raise CubeFormatError(f"unknown dtype {self.dtype!r}; expected one of {sorted(DTYPES)}")
        if self.layout not in LAYOUTS:
            raise CubeFormatError(f"unknown layout {self.layout!r}")
        if self.dtype == "uint16le" and not (self.scale and self.scale > 0):
            raise CubeFormatError("uint16le payloads need a positive scale")

    @property
    def payload_bytes(self) -> int:
        return self.rows * self.cols * self.bands * DTYPES[self.dtype].itemsize

    def to_json(self) -> str:
        d = {"format": FORMAT_TAG, "version": 1}
        d.update(asdict(self))
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CubeFileHeader":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CubeFormatError(f"header is not valid JSON: {exc}") from None
        if not isinstance(d, dict) or d.pop("format", None) != FORMAT_TAG:
            raise CubeFormatError("not a pandenoise cube header")
        d.pop("version", None)
        try:
            return cls(**d)
        except TypeError as exc:
            raise CubeFormatError(str(exc)) from None


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_cube(cube, header_path, data_path=None, dtype: str = "float32le",
               scale: float | None = None, provenance: dict | None = None) -> CubeFileHeader:
    """Write a cube as ``header_path`` (JSON) plus a raw payload.

    ``data_path`` defaults to the header path with a ``.bin`` suffix.
    """
    arr = np.asarray(cube, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[..., None]
    header_path = Path(header_path)
    data_path = Path(data_path) if data_path is not None else header_path.with_suffix(".bin")
    rows, cols, bands = arr.shape
    if dtype == "uint16le" and scale is None:
        scale = 65535.0
    hdr = CubeFileHeader(rows, cols, bands, dtype=dtype, scale=scale,
                         data_file=os.path.relpath(data_path, header_path.parent),
                         provenance=provenance)
    flat = unfold3(arr).ravel(order="F")
    if dtype == "uint16le":
        payload = np.round(np.clip(flat, 0.0, 1.0) * scale).astype(DTYPES[dtype])
    else:
        payload = flat.astype(DTYPES[dtype])
    _atomic_write(data_path, payload.tobytes())
    _atomic_write(header_path, hdr.to_json().encode())
    return hdr


def read_header(header_path) -> CubeFileHeader:
    return CubeFileHeader.from_json(Path(header_path).read_text())


def read_cube(header_path, data_path=None) -> HyperCube:
    """Read a native cube; ENVI headers are detected and routed to :func:`read_envi`."""
    header_path = Path(header_path)
    head = header_path.read_bytes()[:4]
    if head.startswith(b"ENVI"):
        return read_envi(header_path, data_path)
    hdr = read_header(header_path)
    if data_path is None:
        if hdr.data_file is None:
            raise CubeFormatError("header names no data file and none was given")
        data_path = header_path.parent / hdr.data_file
    raw = Path(data_path).read_bytes()
    if len(raw) != hdr.payload_bytes:
        raise TruncatedPayloadError(data_path, hdr.payload_bytes, len(raw))
    flat = np.frombuffer(raw, dtype=DTYPES[hdr.dtype]).astype(np.float64)
    if hdr.dtype == "uint16le":
        flat = flat / hdr.scale
    m = flat.reshape(hdr.rows * hdr.cols, hdr.bands, order="F")
    return HyperCube(fold3(m, hdr.rows, hdr.cols))


# ---------------------------------------------------------------- ENVI

_ENVI_TYPES = {1: "u1", 2: "i2", 3: "i4", 4: "f4", 5: "f8", 12: "u2", 13: "u4", 14: "i8", 15: "u8"}


def parse_envi_header(text: str) -> dict[str, str]:
    if not text.startswith("ENVI"):
        raise CubeFormatError("missing ENVI magic")
    body = text[4:]
    out = {}
    for m in re.finditer(r"^\s*([^=\n]+?)\s*=\s*(\{[^}]*\}|[^\n]*)", body, flags=re.M):
        out[m.group(1).strip().lower()] = m.group(2).strip()
    return out


def read_envi(header_path, data_path=None, scale: float | None = None) -> HyperCube:
    """Read an ENVI-style cube. Values are returned as stored, divided by ``scale`` if given."""
    header_path = Path(header_path)
    h = parse_envi_header(header_path.read_text(errors="replace"))
    try:
        cols, rows, bands = int(h["samples"]), int(h["lines"]), int(h["bands"])
        code = int(h["data type"])
    except (KeyError, ValueError) as exc:
        raise CubeFormatError(f"incomplete ENVI header: {exc}") from None
    if code not in _ENVI_TYPES:
        raise CubeFormatError(f"unsupported ENVI data type {code}")
    interleave = h.get("interleave", "bsq").lower()
    if interleave not in ("bsq", "bil", "bip"):
        raise CubeFormatError(f"unknown ENVI interleave {interleave!r}")
    endian = ">" if h.get("byte order", "0").strip() == "1" else "<"
    dt = np.dtype(endian + _ENVI_TYPES[code])
    offset = int(h.get("header offset", "0"))
    if data_path is None:
        stem = header_path.with_suffix("")
        cands = [stem] + [stem.with_suffix(s) for s in (".img", ".dat", ".raw", ".bsq", ".bil", ".bip")]
        found = [c for c in cands if c.is_file()]
        if not found:
            raise CubeFormatError(f"no ENVI payload found next to {header_path}")
        data_path = found[0]
    raw = Path(data_path).read_bytes()
    need = offset + rows * cols * bands * dt.itemsize
    if len(raw) < need:
        raise TruncatedPayloadError(data_path, need, len(raw))
    flat = np.frombuffer(raw, dtype=dt, count=rows * cols * bands, offset=offset).astype(np.float64)
    if interleave == "bsq":
        cube = flat.reshape(bands, rows, cols).transpose(1, 2, 0)
    elif interleave == "bil":
        cube = flat.reshape(rows, bands, cols).transpose(0, 2, 1)
    else:
        cube = flat.reshape(rows, cols, bands)
    if scale:
        cube = cube / scale
    return HyperCube(np.ascontiguousarray(cube))


# ---------------------------------------------------------------- PAN / PNG


def _read_png_gray(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(8) != PNG_MAGIC:
            raise CubeFormatError(f"{path}: not a PNG file (bad signature)")
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:  # Pillow raises several unrelated types
        raise CubeFormatError(f"{path}: unreadable PNG: {exc}") from None
    if img.mode not in ("L", "I;16", "I;16B", "I;16L", "I", "1"):
        raise CubeFormatError(f"{path}: expected a single-channel PNG, got mode {img.mode}")
    return np.asarray(img, dtype=np.float64)


def read_pan(path, target_shape: tuple[int, int] | None = None) -> PanImage:
    """Read a PAN image from a grayscale PNG or a single-band cube file.

    The result is min-max normalised; with ``target_shape`` it is also
    resampled onto that grid. A constant input yields a degenerate PAN.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head == PNG_MAGIC or path.suffix.lower() == ".png":
        arr = _read_png_gray(path)
    else:
        cube = read_cube(path)
        if cube.bands != 1:
            raise CubeFormatError(f"{path}: PAN must be single-band, file has {cube.bands} bands")
        arr = cube.data[:, :, 0]
    if target_shape is not None and tuple(target_shape) != arr.shape:
        return pan_resample(arr, *target_shape)
    return normalize_pan(arr)


def write_pan_png(pan, path, bits: int = 16) -> None:
    arr = np.clip(np.asarray(pan, dtype=np.float64), 0.0, 1.0)
    if bits == 16:
        img = Image.fromarray(np.round(arr * 65535).astype(np.uint16))
    elif bits == 8:
        img = Image.fromarray(np.round(arr * 255).astype(np.uint8), mode="L")
    else:
        raise ValueError("bits must be 8 or 16")
    img.save(path)


def stretch(band: np.ndarray, lo_pct: float = 2.0, hi_pct: float = 98.0) -> np.ndarray:
    """Percentile stretch to [0, 1]; a flat band maps to 0.5."""
    lo, hi = np.percentile(band, [lo_pct, hi_pct])
    if hi <= lo:
        return np.full(band.shape, 0.5)
    return np.clip((band - lo) / (hi - lo), 0.0, 1.0)


def falsecolor(cube, band_triple) -> np.ndarray:
    arr = np.asarray(cube, dtype=np.float64)
    if len(band_triple) != 3:
        raise ValueError("need exactly three band indices")
    for b in band_triple:
        if not 0 <= b < arr.shape[2]:
            raise IndexError(f"band index {b} out of range for {arr.shape[2]} bands")
    rgb = np.stack([stretch(arr[:, :, b]) for b in band_triple], axis=2)
    return np.round(rgb * 255).astype(np.uint8)


def export_falsecolor(cube, band_triple, path) -> np.ndarray:
    """Write an 8-bit RGB PNG of three bands with a 2-98 % stretch."""
    rgb = falsecolor(cube, band_triple)
    Image.fromarray(rgb, mode="RGB").save(path)
    return rgb
