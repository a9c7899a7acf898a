"""Continuous Laplacian edge mask.

The mask weights each pixel by its normalized absolute Laplacian response,
so gradient steps land on edges and texture where contrast masking hides
them, and flat regions stay untouched.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

LAPLACIAN_KERNEL = np.array(
    [[0.0, 1.0, 0.0],
     [1.0, -4.0, 1.0],
     [0.0, 1.0, 0.0]]
)


def laplacian_response(x: np.ndarray) -> np.ndarray:
    """Raw Laplacian of a grayscale image with replicate padding."""
    return ndimage.convolve(np.asarray(x, dtype=np.float64), LAPLACIAN_KERNEL, mode="nearest")


def laplacian_mask(x: np.ndarray) -> np.ndarray:
    """Per-pixel weights in [0, 1]: ``|x * K| / max |x * K|``.

    A constant image yields an all-zero mask.
    """
    resp = np.abs(laplacian_response(x))
    peak = resp.max()
    if peak == 0:
        return np.zeros_like(resp)
    return resp / peak


def apply_mask(grad: np.ndarray, mask: np.ndarray) -> np.ndarray:
    grad = np.asarray(grad)
    mask = np.asarray(mask)
    if grad.shape != mask.shape:
        raise ValueError(f"mask shape {mask.shape} does not match gradient shape {grad.shape}")
    return grad * mask
