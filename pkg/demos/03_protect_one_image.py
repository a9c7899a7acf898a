"""
Protecting one image
====================

NA perturbs every pixel, NA-Mask only edges, and PAChroma additionally
averages gradients over randomly transformed copies. Run
``02_train_toy_colorizer.py`` first to produce ``small_cnn.bin``.
"""

from uncolorable.attacks import AttackConfig, run_attack
from uncolorable.colorizers import load_model
from uncolorable.data import photo_patch_corpus
from uncolorable.image_core import quantize, save_image, to_grayscale
from uncolorable.metrics import colorfulness, psnr, ssim
from uncolorable.transforms import jpeg_roundtrip

model = load_model("small_cnn.bin")
x = to_grayscale(photo_patch_corpus(1, 64, seed=42)[0])
print(f"clean output CF {colorfulness(model.forward(x)):.2f}")

for kind in ("random", "na", "na-mask", "pachroma"):
    res = run_attack(model, x, AttackConfig.preset(kind, seed=0))
    adv = quantize(res.adversarial)
    jpeg = jpeg_roundtrip(adv, 50)
    print(f"{kind:9s} CF {colorfulness(model.forward(adv)):6.2f}  "
          f"after JPEG-50 {colorfulness(model.forward(jpeg)):6.2f}  "
          f"PSNR {psnr(x, adv):5.2f} dB  SSIM {ssim(x, adv):.3f}")
    save_image(adv, f"protected_{kind}.png")
    save_image(model.forward(adv), f"colorized_{kind}.png")
