"""Block-wise structure-invariant augmentations and post-processing.

The block transforms are written against torch tensors so that gradients can
flow from a transformed copy back to the shared source image. The numpy
entry points (:func:`sia_transform`, :func:`transform_batch`) wrap the same
code for callers that only need pixels.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .image_core import from_uint8, resize, to_uint8

FAMILIES = (
    "shift",
    "flip",
    "rotate",
    "scale",
    "jitter",
    "noise",
    "dct_filter",
    "resize",
    "dropout",
)


@dataclass(frozen=True)
class TransformConfig:
    """Parameter ranges for the block transforms."""

    families: tuple[str, ...] = FAMILIES
    shift_frac: float = 0.25
    scale_range: tuple[float, float] = (0.8, 1.2)
    jitter: float = 0.1
    noise_sigma: float = 0.05
    dct_drop: float = 0.25
    resize_factor: float = 0.5
    dropout_p: float = 0.1

    def __post_init__(self):
        unknown = set(self.families) - set(FAMILIES)
        if unknown or not self.families:
            raise ValueError(f"unknown or empty transform families: {sorted(unknown)}")


@dataclass
class TransformSpec:
    """One concrete draw of a transform family for one block."""

    family: str
    params: dict = field(default_factory=dict)


def block_grid(h: int, w: int, s: int) -> list[tuple[int, int, int, int]]:
    """``s x s`` blocks as ``(y0, y1, x0, x1)``; the last row/column takes the remainder."""
    if s < 1:
        raise ValueError(f"split must be >= 1, got {s}")
    if s > min(h, w):
        raise ValueError(f"split {s} exceeds the smaller image side {min(h, w)}")
    ys = [i * (h // s) for i in range(s)] + [h]
    xs = [j * (w // s) for j in range(s)] + [w]
    return [(ys[i], ys[i + 1], xs[j], xs[j + 1]) for i in range(s) for j in range(s)]


def draw_spec(family: str, shape: tuple[int, int], rng: np.random.Generator,
              cfg: TransformConfig) -> TransformSpec:
    h, w = shape
    if family == "shift":
        my = int(round(cfg.shift_frac * h))
        mx = int(round(cfg.shift_frac * w))
        return TransformSpec(family, {"dy": int(rng.integers(-my, my + 1)),
                                      "dx": int(rng.integers(-mx, mx + 1))})
    if family == "flip":
        return TransformSpec(family, {"axis": int(rng.integers(0, 2))})
    if family == "rotate":
        return TransformSpec(family, {"k": int(rng.integers(1, 4))})
    if family == "scale":
        return TransformSpec(family, {"factor": float(rng.uniform(*cfg.scale_range))})
    if family == "jitter":
        return TransformSpec(family, {"offset": float(rng.uniform(-cfg.jitter, cfg.jitter))})
    if family == "noise":
        return TransformSpec(family, {"noise": rng.normal(0.0, cfg.noise_sigma, size=shape)})
    if family == "dct_filter":
        return TransformSpec(family, {"drop": cfg.dct_drop})
    if family == "resize":
        return TransformSpec(family, {"factor": cfg.resize_factor})
    if family == "dropout":
        return TransformSpec(family, {"keep": rng.random(shape) >= cfg.dropout_p})
    raise ValueError(f"unknown transform family {family!r}")


def _reflect_index(n: int, offset: int) -> np.ndarray:
    pad = abs(offset)
    mode = "reflect" if n > 1 else "edge"
    padded = np.pad(np.arange(n), pad, mode=mode)
    start = pad - offset
    return padded[start:start + n]


def _resize_t(b: torch.Tensor, h: int, w: int) -> torch.Tensor:
    return F.interpolate(b[None, None], size=(h, w), mode="bilinear", align_corners=False)[0, 0]


def dct_matrix(n: int, dtype=torch.float64) -> torch.Tensor:
    """Orthonormal DCT-II matrix."""
    k = torch.arange(n, dtype=dtype)[:, None]
    i = torch.arange(n, dtype=dtype)[None, :]
    m = torch.cos(math.pi * (2 * i + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
    m[0] /= math.sqrt(2.0)
    return m


def _dct_lowpass(b: torch.Tensor, drop: float) -> torch.Tensor:
    h, w = b.shape
    n_drop = int(math.floor(drop * h * w))
    if n_drop == 0:
        return b
    ch, cw = dct_matrix(h, b.dtype), dct_matrix(w, b.dtype)
    coef = ch @ b @ cw.T
    freq = (np.arange(h)[:, None] / h + np.arange(w)[None, :] / w).ravel()
    order = np.argsort(freq, kind="stable")
    keep = np.ones(h * w, dtype=bool)
    keep[order[h * w - n_drop:]] = False
    keep_t = torch.as_tensor(keep.reshape(h, w), dtype=b.dtype)
    return ch.T @ (coef * keep_t) @ cw


def apply_spec(b: torch.Tensor, spec: TransformSpec) -> torch.Tensor:
    """Apply one transform to a 2-D block tensor; output has the block's shape."""
    h, w = b.shape
    p = spec.params
    fam = spec.family
    if fam == "shift":
        iy = torch.as_tensor(_reflect_index(h, p["dy"]))
        ix = torch.as_tensor(_reflect_index(w, p["dx"]))
        return b[iy][:, ix]
    if fam == "flip":
        return torch.flip(b, dims=(p["axis"],))
    if fam == "rotate":
        out = torch.rot90(b, p["k"], dims=(0, 1))
        return out if out.shape == b.shape else _resize_t(out, h, w)
    if fam == "scale":
        return torch.clamp(b * p["factor"], 0.0, 1.0)
    if fam == "jitter":
        return torch.clamp(b + p["offset"], 0.0, 1.0)
    if fam == "noise":
        return torch.clamp(b + torch.as_tensor(p["noise"], dtype=b.dtype), 0.0, 1.0)
    if fam == "dct_filter":
        return torch.clamp(_dct_lowpass(b, p["drop"]), 0.0, 1.0)
    if fam == "resize":
        small = _resize_t(b, max(1, round(h * p["factor"])), max(1, round(w * p["factor"])))
        return _resize_t(small, h, w)
    if fam == "dropout":
        return b * torch.as_tensor(p["keep"], dtype=b.dtype)
    raise ValueError(f"unknown transform family {fam!r}")


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sia_transform_torch(x: torch.Tensor, s: int, rng, cfg: TransformConfig | None = None,
                        specs: list[TransformSpec] | None = None) -> torch.Tensor:
    """Differentiable block-wise transform of a 2-D image tensor.

    ``specs`` pins the per-block transforms (row-major order); otherwise one
    family is drawn uniformly per block.
    """
    cfg = cfg or TransformConfig()
    rng = _as_rng(rng)
    h, w = x.shape
    blocks = block_grid(h, w, s)
    if specs is not None and len(specs) != len(blocks):
        raise ValueError(f"expected {len(blocks)} specs, got {len(specs)}")
    out = x.clone()
    for k, (y0, y1, x0, x1) in enumerate(blocks):
        if specs is None:
            family = cfg.families[int(rng.integers(len(cfg.families)))]
            spec = draw_spec(family, (y1 - y0, x1 - x0), rng, cfg)
        else:
            spec = specs[k]
        out[y0:y1, x0:x1] = apply_spec(x[y0:y1, x0:x1], spec)
    return torch.clamp(out, 0.0, 1.0)


def sia_transform(x: np.ndarray, s: int, rng, cfg: TransformConfig | None = None,
                  specs: list[TransformSpec] | None = None) -> np.ndarray:
    """Numpy front end of :func:`sia_transform_torch`."""
    xt = torch.as_tensor(np.asarray(x, dtype=np.float64))
    with torch.no_grad():
        out = sia_transform_torch(xt, s, rng, cfg, specs)
    return out.numpy()


def copy_seeds(seed: int, n: int) -> list[int]:
    """Per-copy seeds; copy ``i`` always uses ``seed + i``."""
    return [seed + i for i in range(n)]


def transform_batch_torch(x: torch.Tensor, n: int, s: int, seed: int,
                          cfg: TransformConfig | None = None) -> torch.Tensor:
    if n < 1:
        raise ValueError(f"batch size must be >= 1, got {n}")
    return torch.stack([sia_transform_torch(x, s, cs, cfg) for cs in copy_seeds(seed, n)])


def transform_batch(x: np.ndarray, n: int, s: int, seed: int,
                    cfg: TransformConfig | None = None, enabled: bool = True) -> list[np.ndarray]:
    """``n`` independent block-transformed copies of ``x``.

    With ``enabled=False`` the untransformed image is returned once.
    """
    if n < 1:
        raise ValueError(f"batch size must be >= 1, got {n}")
    if not enabled:
        return [np.array(x, dtype=np.float64)]
    return [sia_transform(x, s, cs, cfg) for cs in copy_seeds(seed, n)]


def jpeg_roundtrip(x: np.ndarray, quality: int) -> np.ndarray:
    """Encode to baseline JPEG at ``quality`` and decode again."""
    if not isinstance(quality, (int, np.integer)) or not 1 <= quality <= 100:
        raise ValueError(f"JPEG quality must be an integer in [1, 100], got {quality!r}")
    x = np.asarray(x, dtype=np.float64)
    mode = "L" if x.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(to_uint8(x), mode=mode).save(buf, format="JPEG", quality=int(quality))
    buf.seek(0)
    with Image.open(buf) as im:
        return from_uint8(np.asarray(im.convert(mode)))


def random_resized_crop(x: np.ndarray, rng, scale: tuple[float, float] = (0.6, 1.0),
                        ratio: tuple[float, float] = (3 / 4, 4 / 3)) -> np.ndarray:
    """Crop a random region (area fraction in ``scale``, aspect in ``ratio``)
    and resize it back to the input size."""
    rng = _as_rng(rng)
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape[:2]
    area = h * w
    for _ in range(10):
        target = area * rng.uniform(*scale)
        aspect = rng.uniform(*ratio)
        cw = int(round(math.sqrt(target * aspect)))
        ch = int(round(math.sqrt(target / aspect)))
        if 0 < cw <= w and 0 < ch <= h:
            break
    else:
        ch, cw = min(ch, h), min(cw, w)
    top = int(rng.integers(0, h - ch + 1))
    left = int(rng.integers(0, w - cw + 1))
    return resize(x[top:top + ch, left:left + cw], h, w)
