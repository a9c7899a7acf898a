"""
Colorfulness and the Laplacian mask
===================================

The attack minimizes one number, the colorfulness of the colorizer's output,
and spends its budget where the eye is least sensitive: on edges.
"""

import numpy as np

from uncolorable.data import photo_patch_corpus
from uncolorable.image_core import save_image, to_grayscale
from uncolorable.masking import laplacian_mask
from uncolorable.metrics import colorfulness

# two saturated pixels, one red and one green: rg spreads by 255, yb sits at 127.5
print("red+green:", colorfulness(np.array([[[1.0, 0, 0], [0, 1.0, 0]]])))

# any image with R = G = B scores exactly zero
gray = np.repeat(np.random.default_rng(0).random((32, 32, 1)), 3, axis=2)
print("gray:", colorfulness(gray))

# a few photo patches, with their colorfulness and that of their gray versions
patches = photo_patch_corpus(4, 64, seed=3)
for i, p in enumerate(patches):
    g = to_grayscale(p)
    print(f"patch {i}: CF {colorfulness(p):6.2f}, gray CF {colorfulness(np.stack([g] * 3, -1)):.1f}")

# the mask is |Laplacian| / max, so flat regions get weight 0 and edges get up to 1
mask = laplacian_mask(to_grayscale(patches[0]))
print(f"mask: mean {mask.mean():.3f}, zero pixels {(mask == 0).sum()}")
save_image(mask, "mask_patch0.png")
