"""Image representations, color conversion and file I/O.

Images are plain numpy arrays in ``[0, 1]``:

* grayscale: ``float64`` array of shape ``(H, W)``
* RGB: ``float64`` array of shape ``(H, W, 3)``

8-bit values only appear at the file boundary.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

MIN_SIDE = 8

# ITU-R BT.601 luma
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

_CODECS = {".png": "PNG", ".jpg": "JPEG", ".jpeg": "JPEG"}


class ImageFormatError(ValueError):
    """Raised for unsupported or unreadable image files."""


def is_gray(img: np.ndarray) -> bool:
    return img.ndim == 2


def check_image(img: np.ndarray, min_side: int = MIN_SIDE) -> np.ndarray:
    """Validate shape and value range, returning ``img`` as float64."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] != 3):
        raise ValueError(f"expected (H, W) or (H, W, 3) array, got shape {img.shape}")
    if min(img.shape[:2]) < min_side:
        raise ValueError(f"image sides must be >= {min_side}, got {img.shape[:2]}")
    if not np.isfinite(img).all() or img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("pixel values must lie in [0, 1]")
    return img


def to_uint8(img: np.ndarray) -> np.ndarray:
    # round half up, not numpy's round-half-even
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def from_uint8(arr: np.ndarray) -> np.ndarray:
    return arr.astype(np.float64) / 255.0


def quantize(img: np.ndarray) -> np.ndarray:
    """What ``img`` becomes after an 8-bit save and reload."""
    return from_uint8(to_uint8(img))


def load_image(path: str | Path) -> np.ndarray:
    """Load a PNG/JPEG file as a float image in [0, 1].

    Single-channel files come back as ``(H, W)``; everything else is
    converted to RGB. Alpha is dropped.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        with Image.open(path) as im:
            if im.format not in ("PNG", "JPEG"):
                raise ImageFormatError(f"{path}: unsupported format {im.format}")
            if im.mode in ("L", "I;16", "I", "1"):
                im = im.convert("L")
            else:
                im = im.convert("RGB")
            arr = np.asarray(im)
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"{path}: not a readable image") from exc
    return from_uint8(arr)


def save_image(img: np.ndarray, path: str | Path, quality: int = 95) -> None:
    """Write ``img`` as an 8-bit file; the extension picks the codec."""
    path = Path(path)
    codec = _CODECS.get(path.suffix.lower())
    if codec is None:
        raise ImageFormatError(f"{path}: extension must be one of {sorted(_CODECS)}")
    img = np.asarray(img, dtype=np.float64)
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("pixel values must lie in [0, 1]")
    mode = "L" if img.ndim == 2 else "RGB"
    pil = Image.fromarray(to_uint8(img), mode=mode)
    kwargs = {"quality": quality} if codec == "JPEG" else {}
    pil.save(path, format=codec, **kwargs)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma of an RGB image."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img.copy()
    gray = img @ LUMA_WEIGHTS
    return np.clip(gray, 0.0, 1.0)


def gray_to_rgb(img: np.ndarray) -> np.ndarray:
    return np.repeat(np.asarray(img, dtype=np.float64)[..., None], 3, axis=2)


def _linear_taps(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel centers (align_corners=False), edge-clamped
    scale = n_in / n_out
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel sampling (no antialiasing)."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target size must be positive, got {out_h}x{out_w}")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.copy()
    lo, hi, fy = _linear_taps(h, out_h)
    fy = fy.reshape((-1,) + (1,) * (img.ndim - 1))
    # a + (b - a) * f keeps constant images exact
    rows = img[lo] + (img[hi] - img[lo]) * fy
    lo, hi, fx = _linear_taps(w, out_w)
    fx = fx.reshape((1, -1) + (1,) * (img.ndim - 2))
    out = rows[:, lo] + (rows[:, hi] - rows[:, lo]) * fx
    return np.clip(out, 0.0, 1.0)
