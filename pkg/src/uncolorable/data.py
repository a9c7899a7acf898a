"""Image corpora: photo patches, procedural toy scenes and a directory ingester.

The default toy corpus crops random square patches out of the sample
photographs bundled with scikit-image. The synthetic scenes tie each color to a distinct luminance/texture
signature (smooth bright sky, high-frequency grass, striped walls, shaded
balls, flat white bubbles) so that a small network can learn a grayscale to
color mapping worth attacking.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image

from .image_core import load_image, quantize, resize, save_image, to_grayscale

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

SKY_TOP = np.array([0.25, 0.45, 0.92])
SKY_HORIZON = np.array([0.65, 0.82, 1.0])
GRASS = np.array([0.22, 0.55, 0.12])
SAND = np.array([0.86, 0.70, 0.38])
SUN = np.array([1.0, 0.88, 0.25])
BALL = np.array([0.88, 0.12, 0.10])
WALL = np.array([0.55, 0.25, 0.75])
BUBBLE = np.array([0.97, 0.97, 0.97])


def _disc(yy, xx, cy, cx, r):
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r**2


def synthetic_scene(rng: np.random.Generator, size: int = 64) -> np.ndarray:
    """One RGB toy landscape, quantized to 8-bit levels."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    img = np.empty((size, size, 3))

    horizon = size * rng.uniform(0.35, 0.65)
    horizon = horizon + size * 0.06 * np.sin(xx / size * 2 * np.pi * rng.uniform(0.5, 2) + rng.uniform(0, 6.3))
    sky = yy < horizon

    t = np.clip(yy / np.maximum(horizon, 1), 0, 1)[..., None]
    img[:] = SKY_TOP + (SKY_HORIZON - SKY_TOP) * t
    img += rng.normal(0, 0.008, size=(size, size, 1))

    ground_color = GRASS if rng.random() < 0.7 else SAND
    ground_noise = 0.12 if ground_color is GRASS else 0.04
    tex = 1.0 + rng.normal(0, ground_noise, size=(size, size, 1))
    img[~sky] = (ground_color * tex)[~sky]

    if rng.random() < 0.6:
        r = size * rng.uniform(0.06, 0.12)
        m = _disc(yy, xx, rng.uniform(r, size * 0.3), rng.uniform(r, size - r), r) & sky
        img[m] = SUN

    for _ in range(rng.integers(0, 3)):
        kind = rng.choice(["ball", "wall", "bubble"])
        if kind == "ball":
            r = size * rng.uniform(0.08, 0.16)
            cy, cx = rng.uniform(r, size - r), rng.uniform(r, size - r)
            m = _disc(yy, xx, cy, cx, r)
            shade = 1.0 - 0.45 * np.sqrt(((yy - cy + r / 3) ** 2 + (xx - cx + r / 3) ** 2)) / (1.4 * r)
            img[m] = (BALL * shade[..., None])[m]
        elif kind == "wall":
            h, w = size * rng.uniform(0.15, 0.35), size * rng.uniform(0.15, 0.35)
            y0, x0 = rng.uniform(0, size - h), rng.uniform(0, size - w)
            m = (yy >= y0) & (yy < y0 + h) & (xx >= x0) & (xx < x0 + w)
            stripes = 0.8 + 0.2 * (np.floor((yy - y0) / 2) % 2)
            img[m] = (WALL * stripes[..., None])[m]
        else:
            ry, rx = size * rng.uniform(0.08, 0.15), size * rng.uniform(0.1, 0.2)
            cy, cx = rng.uniform(ry, size - ry), rng.uniform(rx, size - rx)
            m = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1
            img[m] = BUBBLE

    return quantize(np.clip(img, 0, 1))


def synthetic_corpus(n: int, size: int = 64, seed: int = 0) -> np.ndarray:
    """``(n, size, size, 3)`` stack of toy scenes."""
    rng = np.random.default_rng(seed)
    return np.stack([synthetic_scene(rng, size) for _ in range(n)])


SAMPLE_PHOTOS = ("astronaut", "chelsea", "coffee", "rocket", "immunohistochemistry",
                 "hubble_deep_field", "retina", "motorcycle_left", "color")


def sample_photos() -> list[np.ndarray]:
    """The bundled scikit-image color photographs as uint8 RGB arrays."""
    import skimage
    import skimage.data

    data_dir = Path(skimage.__file__).parent / "data"
    out = []
    for name in SAMPLE_PHOTOS:
        if hasattr(skimage.data, name):
            img = getattr(skimage.data, name)()
        else:
            img = np.asarray(Image.open(data_dir / f"{name}.png").convert("RGB"))
        out.append(np.ascontiguousarray(img[..., :3]))
    return out


def photo_patch_corpus(n: int, size: int = 64, seed: int = 0) -> np.ndarray:
    """``(n, size, size, 3)`` random square crops of the sample photos.

    Crop sides are drawn between ``size`` and half the shorter photo side,
    then resampled to ``size`` with bicubic filtering.
    """
    rng = np.random.default_rng(seed)
    photos = sample_photos()
    out = []
    for _ in range(n):
        im = photos[rng.integers(len(photos))]
        h, w = im.shape[:2]
        s = int(rng.integers(size, min(h, w) // 2 + 1))
        y, x = rng.integers(0, h - s + 1), rng.integers(0, w - s + 1)
        patch = Image.fromarray(im[y:y + s, x:x + s]).resize((size, size), Image.BICUBIC)
        out.append(np.asarray(patch, dtype=np.float64) / 255.0)
    return np.stack(out)


def write_corpus(images: np.ndarray, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, img in enumerate(images):
        p = directory / f"img_{i:05d}.png"
        save_image(img, p)
        paths.append(p)
    return paths


def list_images(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(directory)
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _load_rgb(path: Path, size: int) -> np.ndarray:
    img = load_image(path)
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=2)
    return resize(img, size, size)


def ingest_dataset(directory: str | Path, size: int, n: int, seed: int = 0) -> list[np.ndarray]:
    """Seeded sample of ``n`` images from ``directory`` as ``size x size`` grayscale.

    Files are sorted by name before sampling so the result only depends on
    the directory contents and the seed. Images are converted to gray and
    then resized (the aspect ratio is not preserved).
    """
    files = list_images(directory)
    if len(files) < n:
        raise ValueError(f"{directory}: need {n} images, found {len(files)}")
    rng = np.random.default_rng(seed)
    pick = sorted(rng.choice(len(files), size=n, replace=False))
    return [resize(to_grayscale(load_image(files[i])), size, size) for i in pick]


def load_training_pairs(directory: str | Path, size: int) -> tuple[np.ndarray, np.ndarray]:
    """All images in ``directory`` as ``(grays, colors)`` arrays for training."""
    files = list_images(directory)
    if not files:
        raise ValueError(f"{directory}: no images found")
    colors = np.stack([_load_rgb(p, size) for p in files])
    grays = np.stack([to_grayscale(c) for c in colors])
    return grays, colors
