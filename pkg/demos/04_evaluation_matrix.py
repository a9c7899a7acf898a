"""
The evaluation matrix
=====================

Every model crafts perturbations that every other model then colorizes.
Diagonal cells are white-box, the rest measure transfer. The config file
``toy_experiment.yaml`` lists the models and all attack parameters.

Prepare the inputs once from the shell::

    uncolorable corpus --out toy_corpus --n 600
    uncolorable train --arch small_cnn   --data toy_corpus --out small_cnn.bin
    uncolorable train --arch dilated_cnn --data toy_corpus --out dilated_cnn.bin --seed 1
    uncolorable train --arch attn_unet   --data toy_corpus --out attn_unet.bin --seed 2
"""

from uncolorable.evaluation import load_config, run_matrix

cfg = load_config("toy_experiment.yaml")

# a quick pass: fewer images and seeds than the config asks for
cfg.n_images, cfg.seeds = 4, (0,)
records = run_matrix(cfg)

white_box = [r for r in records if r.source_model == r.attack_model and r.attack_type == "pachroma"]
for r in white_box:
    print(f"{r.source_model}: CF {r.cf_unprotected:.1f} -> {r.cf_protected:.1f} ({r.cf_reduction_pct:.1f}% less)")
