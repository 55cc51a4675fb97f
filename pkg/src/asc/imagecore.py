"""Raster types, pattern composition, l0 accounting and lossless image I/O.

Images are ``(H, W, 3)`` float64 arrays in [0, 1]; masks are ``(H, W)`` uint8
arrays holding only 0 and 1. Both are plain numpy arrays so they interoperate
with everything else; the ``as_*`` helpers validate and normalise inputs.
"""
from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage


class ShapeError(ValueError):
    """Array dimensions do not agree."""


class ImageIOError(OSError):
    """Base class for image file errors."""


class UnreadableImageError(ImageIOError):
    pass


class MalformedImageError(ImageIOError):
    pass


class UnsupportedBitDepthError(ImageIOError):
    pass


def as_image(x, copy: bool = False) -> np.ndarray:
    arr = np.array(x, dtype=np.float64, copy=copy) if copy else np.asarray(x, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"image must be (H, W, 3) with H, W >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image values must be finite and within [0, 1]")
    return arr


def as_mask(m) -> np.ndarray:
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise ShapeError(f"mask must be 2-D, got shape {arr.shape}")
    if arr.dtype == bool:
        return arr.astype(np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("mask values must be exactly 0 or 1")
    return arr.astype(np.uint8)


@dataclass(frozen=True)
class Pattern:
    """A mask plus a dense color field; colors only matter where the mask is set."""

    mask: np.ndarray
    colors: np.ndarray

    def __post_init__(self):
        mask = as_mask(self.mask)
        colors = np.asarray(self.colors, dtype=np.float64)
        if colors.shape != mask.shape + (3,):
            raise ShapeError(f"colors {colors.shape} do not match mask {mask.shape}")
        mask.setflags(write=False)
        colors = colors.copy()
        colors.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "colors", colors)

    @property
    def l0(self) -> int:
        return l0_norm(self.mask)


def apply_pattern(x, p: Pattern) -> np.ndarray:
    """Composite ``(1 - M) * x + M * T`` without touching ``x``.

    Uses selection rather than arithmetic so unmasked pixels are bit-exact.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != p.colors.shape:
        raise ShapeError(f"image {x.shape} does not match pattern {p.colors.shape}")
    return np.where(p.mask[..., None].astype(bool), p.colors, x)


def l0_norm(m) -> int:
    return int(np.count_nonzero(as_mask(m)))


def pixel_set(m) -> list[tuple[int, int]]:
    """Row-major list of ``(row, col)`` coordinates of the selected pixels."""
    rows, cols = np.nonzero(as_mask(m))
    return list(zip(rows.tolist(), cols.tolist()))


def mask_of(coords, h: int, w: int) -> np.ndarray:
    out = np.zeros((h, w), dtype=np.uint8)
    seen = set()
    for r, c in coords:
        r, c = int(r), int(c)
        if not (0 <= r < h and 0 <= c < w):
            raise IndexError(f"pixel ({r}, {c}) outside {h}x{w} canvas")
        if (r, c) in seen:
            raise ValueError(f"duplicate pixel ({r}, {c})")
        seen.add((r, c))
        out[r, c] = 1
    return out


# -- file I/O ---------------------------------------------------------------

def quantize(x) -> np.ndarray:
    """Map [0, 1] floats to bytes with round-half-up."""
    return np.floor(np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def dequantize(b) -> np.ndarray:
    return np.asarray(b, dtype=np.float64) / 255.0


def _write_ppm(data: np.ndarray, path: Path) -> None:
    h, w = data.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(data).tobytes())


def _ppm_tokens(buf: bytes, count: int):
    tokens, pos = [], 2
    while len(tokens) < count:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MalformedImageError("truncated PPM header")
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates header from raster
    return tokens, pos + 1


def _read_ppm(path: Path) -> np.ndarray:
    buf = path.read_bytes()
    if buf[:2] != b"P6":
        raise MalformedImageError(f"{path}: not a binary PPM")
    tokens, offset = _ppm_tokens(buf, 3)
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise MalformedImageError(f"{path}: bad PPM header") from exc
    if w < 1 or h < 1:
        raise MalformedImageError(f"{path}: bad PPM dimensions")
    if maxval != 255:
        raise UnsupportedBitDepthError(f"{path}: maxval {maxval}, only 8-bit supported")
    raster = buf[offset:offset + w * h * 3]
    if len(raster) != w * h * 3:
        raise MalformedImageError(f"{path}: truncated PPM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3)


def _read_png(path: Path) -> np.ndarray:
    try:
        with PILImage.open(path) as im:
            mode = im.mode
            if mode.startswith("I") or mode == "F":
                raise UnsupportedBitDepthError(f"{path}: mode {mode} is not 8-bit")
            if mode not in ("RGB", "RGBA", "L", "P", "1"):
                raise UnsupportedBitDepthError(f"{path}: unsupported mode {mode}")
            im.load()
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except ImageIOError:
        raise
    except (OSError, SyntaxError, ValueError, zlib.error, struct.error) as exc:
        raise MalformedImageError(f"{path}: {exc}") from exc


def _read_bytes(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file() or not os.access(path, os.R_OK):
        raise UnreadableImageError(f"cannot read {path}")
    if path.suffix.lower() in (".ppm", ".pnm"):
        return _read_ppm(path)
    return _read_png(path)


def load_image(path) -> np.ndarray:
    return dequantize(_read_bytes(path))


def save_image(img, path) -> None:
    data = quantize(as_image(img))
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        _write_ppm(data, path)
    else:
        PILImage.fromarray(data).save(path, format="PNG")


def save_mask(m, path) -> None:
    PILImage.fromarray(as_mask(m) * np.uint8(255)).save(Path(path), format="PNG")


def load_mask(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise UnreadableImageError(f"cannot read {path}")
    try:
        with PILImage.open(path) as im:
            data = np.asarray(im.convert("L"), dtype=np.uint8)
    except (OSError, SyntaxError, ValueError) as exc:
        raise MalformedImageError(f"{path}: {exc}") from exc
    return (data >= 128).astype(np.uint8)
