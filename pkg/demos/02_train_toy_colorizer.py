"""
Training a toy colorizer
========================

Three small architectures stand in for production colorizers. Each one is
trained with an L1 loss on gray/color pairs cut from the photographs that
ship with scikit-image.
"""

import numpy as np

from uncolorable.colorizers import gray_baseline_l1, l1_error, save_model, train_colorizer
from uncolorable.data import photo_patch_corpus
from uncolorable.image_core import to_grayscale
from uncolorable.metrics import colorfulness

colors = photo_patch_corpus(600, 64, seed=0)
grays = np.stack([to_grayscale(c) for c in colors])
train, test = slice(0, 500), slice(500, 600)

# a few minutes per model on one core
model = train_colorizer("small_cnn", grays[train], colors[train], epochs=30, seed=0,
                        input_noise=0.04)
print(model, "final train loss", model.history[-1])

# beating "just output the gray image" is the bar for having learned anything
print("test L1:", l1_error(model, grays[test], colors[test]))
print("gray baseline L1:", gray_baseline_l1(grays[test], colors[test]))

outputs = model.forward_batch(grays[test][:10])
print("mean output CF:", np.mean([colorfulness(o) for o in outputs]))

save_model(model, "small_cnn.bin")
