"""Uncolorable examples: perturbations that keep grayscale images gray under colorization."""

from .attacks import PRESETS, AttackConfig, AttackResult, nullifying_attack, pachroma, random_baseline, run_attack
from .colorizers import Colorizer, ColorizerModel, GradientResult, load_model, save_model, train_colorizer
from .evaluation import EvaluationRecord, ExperimentConfig, evaluate_cell, load_config, run_matrix
from .masking import laplacian_mask
from .metrics import colorfulness, psnr, ssim
from .transforms import TransformConfig, jpeg_roundtrip, random_resized_crop, sia_transform

__version__ = "0.1.0"

__all__ = [
    "PRESETS", "AttackConfig", "AttackResult", "nullifying_attack", "pachroma", "random_baseline",
    "run_attack", "Colorizer", "ColorizerModel", "GradientResult", "load_model", "save_model",
    "train_colorizer", "EvaluationRecord", "ExperimentConfig", "evaluate_cell", "load_config",
    "run_matrix", "laplacian_mask", "colorfulness", "psnr", "ssim", "TransformConfig",
    "jpeg_roundtrip", "random_resized_crop", "sia_transform",
]
