"""Colorfulness, PSNR and SSIM.

Colorfulness follows Hasler & Süsstrunk: opponent channels ``rg = R - G`` and
``yb = (R + G) / 2 - B`` on the 0-255 scale, population statistics, and

    CF = sqrt(std_rg^2 + std_yb^2) + 0.3 * sqrt(mean_rg^2 + mean_yb^2)

A differentiable torch version lives next to the numpy one so the attack can
back-propagate through it.
"""

from __future__ import annotations

import math

import numpy as np
import torch
from scipy.signal import convolve2d

CF_SCALE = 255.0
CF_MEAN_WEIGHT = 0.3

SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _opponent(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    img = np.asarray(img, dtype=np.float64) * CF_SCALE
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    return r - g, 0.5 * (r + g) - b


def colorfulness(img: np.ndarray) -> float:
    """Hasler-Süsstrunk colorfulness of an RGB image in [0, 1]."""
    rg, yb = _opponent(img)
    sigma = math.sqrt(rg.var() + yb.var())
    mu = math.sqrt(rg.mean() ** 2 + yb.mean() ** 2)
    return sigma + CF_MEAN_WEIGHT * mu


def colorfulness_gradient(img: np.ndarray) -> np.ndarray:
    """Closed-form d CF / d pixel for an RGB image in [0, 1].

    Terms whose square root sits at zero contribute a zero subgradient.
    """
    rg, yb = _opponent(img)
    n = rg.size
    sigma = math.sqrt(rg.var() + yb.var())
    mu = math.sqrt(rg.mean() ** 2 + yb.mean() ** 2)

    d_rg = np.zeros_like(rg)
    d_yb = np.zeros_like(yb)
    if sigma > 0:
        d_rg += (rg - rg.mean()) / (n * sigma)
        d_yb += (yb - yb.mean()) / (n * sigma)
    if mu > 0:
        d_rg += CF_MEAN_WEIGHT * rg.mean() / (n * mu)
        d_yb += CF_MEAN_WEIGHT * yb.mean() / (n * mu)

    grad = np.stack([d_rg + 0.5 * d_yb, -d_rg + 0.5 * d_yb, -d_yb], axis=-1)
    return grad * CF_SCALE


def _safe_sqrt(v: torch.Tensor) -> torch.Tensor:
    # zero gradient at v == 0 instead of inf * 0 = nan
    pos = v > 0
    return torch.where(pos, torch.sqrt(torch.where(pos, v, torch.ones_like(v))), torch.zeros_like(v))


def colorfulness_torch(rgb: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-image colorfulness of a ``(B, 3, H, W)`` batch.

    Returns ``(cf, degenerate)`` where ``degenerate`` marks images whose
    opponent channels are both constant (both standard deviations zero).
    Degenerate images get their CF detached so they contribute no gradient.
    """
    rgb = rgb.to(torch.float64) * CF_SCALE
    r, g, b = rgb[:, 0], rgb[:, 1], rgb[:, 2]
    rg = (r - g).flatten(1)
    yb = (0.5 * (r + g) - b).flatten(1)

    mean_rg, mean_yb = rg.mean(1), yb.mean(1)
    var_rg = ((rg - mean_rg[:, None]) ** 2).mean(1)
    var_yb = ((yb - mean_yb[:, None]) ** 2).mean(1)
    var = var_rg + var_yb
    degenerate = var == 0

    cf = _safe_sqrt(var) + CF_MEAN_WEIGHT * _safe_sqrt(mean_rg**2 + mean_yb**2)
    cf = torch.where(degenerate, cf.detach(), cf)
    return cf, degenerate


def _same_shape(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """PSNR in dB; ``inf`` for identical images."""
    a, b = _same_shape(a, b)
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(data_range**2 / mse)


def gaussian_window(size: int = SSIM_WIN, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_map(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> np.ndarray:
    """Local SSIM over the valid region of an 11x11 Gaussian window.

    Images narrower than 11 pixels use the largest odd window that fits.
    """
    a, b = _same_shape(a, b)
    if a.ndim != 2:
        raise ValueError("ssim expects grayscale images")
    side = min(a.shape)
    if side < 3:
        raise ValueError(f"image too small for ssim: {a.shape}")
    w = gaussian_window(min(SSIM_WIN, side if side % 2 else side - 1))
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    def filt(x):
        return convolve2d(x, w, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    a, b = _same_shape(a, b)
    if np.array_equal(a, b):
        return 1.0
    return float(ssim_map(a, b, data_range).mean())
