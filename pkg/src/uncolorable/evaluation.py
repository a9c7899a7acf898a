"""Source-model x target-model x attack-type evaluation matrix.

For every cell, perturbations are crafted on the source model and scored on
the target model: output colorfulness with and without protection, output
PSNR, input PSNR/SSIM, and colorfulness after JPEG 75, JPEG 50 and random
resized cropping of the (8-bit saved) protected input. Values are averaged
over images and seeds.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import PIL
import torch
import yaml
from PIL import features

from .attacks import PRESETS, AttackConfig, run_attack
from .colorizers import Colorizer, ColorizerModel, file_hash, load_model
from .data import ingest_dataset
from .image_core import quantize
from .metrics import colorfulness, psnr, ssim
from .transforms import TransformConfig, jpeg_roundtrip, random_resized_crop

log = logging.getLogger(__name__)

# attack seed for image j under experiment seed s
_IMAGE_SEED_STRIDE = 100_000


@dataclass
class EvaluationRecord:
    source_model: str
    attack_model: str
    attack_type: str
    cf_unprotected: float
    cf_protected: float
    cf_reduction_pct: float
    psnr_output_db: float
    psnr_input_db: float
    ssim_input: float
    cf_jpeg75: float
    cf_jpeg50: float
    cf_rrc: float
    n_images: int
    seed: str


RECORD_FIELDS = tuple(f.name for f in fields(EvaluationRecord))
_MEAN_COLUMNS = ("cf_unprotected", "cf_protected", "psnr_output_db", "psnr_input_db",
                 "ssim_input", "cf_jpeg75", "cf_jpeg50", "cf_rrc")


@dataclass
class RobustnessConfig:
    jpeg75: bool = True
    jpeg50: bool = True
    rrc: bool = True
    rrc_draws: int = 5
    rrc_scale: tuple[float, float] = (0.6, 1.0)
    rrc_ratio: tuple[float, float] = (3 / 4, 4 / 3)


@dataclass
class AttackSettings:
    """Attack hyperparameters shared by every preset; budgets in 1/255 units."""

    epsilon_255: float = 16.0
    alpha_255: float | None = None
    iterations: int = 100
    momentum: float = 1.0
    n_copies: int = 20
    split: int = 3
    norm: str = "linf"
    transform_gradient: str = "through"

    def config(self, preset: str, seed: int, transforms: TransformConfig) -> AttackConfig:
        alpha = None if self.alpha_255 is None else self.alpha_255 / 255
        return AttackConfig.preset(
            preset, epsilon=self.epsilon_255 / 255, alpha=alpha, iterations=self.iterations,
            momentum=self.momentum, n_copies=self.n_copies, split=self.split, norm=self.norm,
            transform_gradient=self.transform_gradient, transforms=transforms, seed=seed)


@dataclass
class TrainingSettings:
    arch: str = "small_cnn"
    epochs: int = 30
    lr: float = 2e-3
    batch_size: int = 16
    seed: int = 0
    input_noise: float = 0.0


@dataclass
class ExperimentConfig:
    dataset: str
    models: dict[str, str]
    image_size: int = 64
    n_images: int = 20
    sample_seed: int = 0
    attacks: tuple[str, ...] = PRESETS
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    output_dir: str = "results"
    workers: int = 1
    attack: AttackSettings = field(default_factory=AttackSettings)
    transforms: TransformConfig = field(default_factory=TransformConfig)
    robustness: RobustnessConfig = field(default_factory=RobustnessConfig)
    training: TrainingSettings = field(default_factory=TrainingSettings)

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if not self.models:
            raise ValueError("at least one model is required")
        self.attacks = tuple(a.strip().lower() for a in self.attacks)
        unknown = set(self.attacks) - set(PRESETS)
        if unknown:
            raise ValueError(f"unknown attack presets {sorted(unknown)}")
        self.seeds = tuple(int(s) for s in self.seeds)

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        d = dict(d)
        base = Path(base_dir)

        def rel(p):
            p = Path(p)
            return str(p if p.is_absolute() else base / p)

        d["dataset"] = rel(d["dataset"])
        d["models"] = {k: rel(v) for k, v in d["models"].items()}
        if "output_dir" in d:
            d["output_dir"] = rel(d["output_dir"])
        d["attack"] = AttackSettings(**d.get("attack", {}))
        tr = dict(d.get("transforms", {}))
        for key in ("families", "scale_range"):
            if key in tr:
                tr[key] = tuple(tr[key])
        d["transforms"] = TransformConfig(**tr)
        rob = dict(d.get("robustness", {}))
        for key in ("rrc_scale", "rrc_ratio"):
            if key in rob:
                rob[key] = tuple(rob[key])
        d["robustness"] = RobustnessConfig(**rob)
        d["training"] = TrainingSettings(**d.get("training", {}))
        for key in ("attacks", "seeds"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    return ExperimentConfig.from_dict(raw, base_dir=path.parent)


def _attack_seed(seed: int, image_index: int) -> int:
    return seed * _IMAGE_SEED_STRIDE + image_index


def craft(source: ColorizerModel, attack: str, images: list[np.ndarray], seed: int,
          settings: AttackSettings, transforms: TransformConfig) -> list[np.ndarray]:
    """Protected versions of ``images`` crafted on ``source`` for one seed."""
    out = []
    for j, x in enumerate(images):
        cfg = settings.config(attack, _attack_seed(seed, j), transforms)
        out.append(run_attack(source, x, cfg).adversarial)
    return out


def score_image(target: ColorizerModel, clean: np.ndarray, protected: np.ndarray,
                robustness: RobustnessConfig, seed: int, image_index: int) -> dict[str, float]:
    """Per-image columns of an evaluation record."""
    out_clean = target.forward(clean)
    out_prot = target.forward(protected)
    row = {
        "cf_unprotected": colorfulness(out_clean),
        "cf_protected": colorfulness(out_prot),
        "psnr_output_db": psnr(out_clean, out_prot),
        "psnr_input_db": psnr(clean, protected),
        "ssim_input": ssim(clean, protected),
        "cf_jpeg75": math.nan,
        "cf_jpeg50": math.nan,
        "cf_rrc": math.nan,
    }
    # robustness is measured on what a user would actually distribute: the 8-bit file
    saved = quantize(protected)
    if robustness.jpeg75:
        row["cf_jpeg75"] = colorfulness(target.forward(jpeg_roundtrip(saved, 75)))
    if robustness.jpeg50:
        row["cf_jpeg50"] = colorfulness(target.forward(jpeg_roundtrip(saved, 50)))
    if robustness.rrc:
        vals = [
            colorfulness(target.forward(random_resized_crop(
                saved, np.random.default_rng([seed, image_index, k]),
                robustness.rrc_scale, robustness.rrc_ratio)))
            for k in range(robustness.rrc_draws)
        ]
        row["cf_rrc"] = float(np.mean(vals))
    return row


@dataclass
class CellResult:
    record: EvaluationRecord
    per_seed: dict[str, list[float]]
    flags: list[str]


def reduction_pct(cf_unprotected: float, cf_protected: float) -> tuple[float, bool]:
    """Percent CF reduction; ``(0.0, True)`` when the unprotected CF is zero."""
    if cf_unprotected > 0:
        return 100.0 * (cf_unprotected - cf_protected) / cf_unprotected, False
    return 0.0, True


def _aggregate(source_id: str, target_id: str, attack: str, seeds: tuple[int, ...],
               rows_by_seed: dict[int, list[dict]], n_images: int) -> CellResult:
    per_seed = {c: [float(np.mean([r[c] for r in rows_by_seed[s]])) for s in seeds] for c in _MEAN_COLUMNS}
    means = {c: float(np.mean(v)) for c, v in per_seed.items()}
    red, flagged = reduction_pct(means["cf_unprotected"], means["cf_protected"])
    per_seed["cf_reduction_pct"] = [
        reduction_pct(u, p)[0] for u, p in zip(per_seed["cf_unprotected"], per_seed["cf_protected"])]
    record = EvaluationRecord(
        source_model=source_id, attack_model=target_id, attack_type=attack,
        cf_reduction_pct=red, n_images=n_images, seed=";".join(str(s) for s in seeds), **means)
    return CellResult(record, per_seed, ["cf_unprotected_zero"] if flagged else [])


def _check_images(images: list[np.ndarray]) -> None:
    if not images:
        raise ValueError("no images to evaluate")
    shapes = {np.shape(x) for x in images}
    if len(shapes) != 1 or len(next(iter(shapes))) != 2:
        raise ValueError(f"images must be grayscale and share one size, got {sorted(shapes)}")


def evaluate_cell(source: ColorizerModel, target: ColorizerModel, attack: str,
                  images: list[np.ndarray], cfg: ExperimentConfig,
                  source_id: str = "source", target_id: str = "target") -> EvaluationRecord:
    """One record: craft on ``source``, score on ``target``, average over images and seeds."""
    return _evaluate_cell(source, target, attack, images, cfg, source_id, target_id).record


def _evaluate_cell(source, target, attack, images, cfg, source_id, target_id,
                   crafted: dict[int, list[np.ndarray]] | None = None) -> CellResult:
    _check_images(images)
    rows_by_seed = {}
    for s in cfg.seeds:
        advs = crafted[s] if crafted is not None else craft(
            source, attack, images, s, cfg.attack, cfg.transforms)
        rows_by_seed[s] = [score_image(target, x, a, cfg.robustness, s, j)
                           for j, (x, a) in enumerate(zip(images, advs))]
    return _aggregate(source_id, target_id, attack, cfg.seeds, rows_by_seed, len(images))


def matrix_cells(model_ids: list[str], attacks: tuple[str, ...]) -> list[tuple[str, str, str]]:
    """``(source, target, attack)`` in report order; ``random`` only on the diagonal."""
    cells = []
    for src in model_ids:
        for tgt in model_ids:
            for atk in PRESETS:
                if atk not in attacks or (atk == "random" and src != tgt):
                    continue
                cells.append((src, tgt, atk))
    return cells


def load_models(paths: dict[str, str]) -> dict[str, Colorizer]:
    missing = [p for p in paths.values() if not Path(p).is_file()]
    if missing:
        raise FileNotFoundError(f"model files not found: {missing}")
    return {mid: load_model(p) for mid, p in paths.items()}


def run_matrix(cfg: ExperimentConfig, models: dict[str, ColorizerModel] | None = None,
               images: list[np.ndarray] | None = None, write: bool = True) -> list[EvaluationRecord]:
    """Evaluate every cell of the matrix and (optionally) write CSV/JSON reports.

    Perturbations are crafted once per (source, attack, seed) and reused for
    every target model.
    """
    if models is None:
        models = load_models(cfg.models)
    if images is None:
        images = ingest_dataset(cfg.dataset, cfg.image_size, cfg.n_images, cfg.sample_seed)
    _check_images(images)
    ids = list(models)
    cells = matrix_cells(ids, cfg.attacks)

    jobs = sorted({(src, atk, s) for src, _, atk in cells for s in cfg.seeds})

    def job(key):
        src, atk, s = key
        log.info("crafting %s on %s (seed %d)", atk, src, s)
        return craft(models[src], atk, images, s, cfg.attack, cfg.transforms)

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            crafted_list = list(pool.map(job, jobs))
    else:
        crafted_list = [job(k) for k in jobs]
    crafted = dict(zip(jobs, crafted_list))

    results = []
    for src, tgt, atk in cells:
        per_seed_advs = {s: crafted[(src, atk, s)] for s in cfg.seeds}
        results.append(_evaluate_cell(models[src], models[tgt], atk, images, cfg, src, tgt, per_seed_advs))

    if write:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        records = [r.record for r in results]
        (out / "results.csv").write_text(records_to_csv(records), encoding="utf-8")
        meta = report_metadata(cfg, results)
        (out / "results.json").write_text(records_to_json(records, meta), encoding="utf-8")
        print(summary_table(records))
    return [r.record for r in results]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records: list[EvaluationRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in records:
        w.writerow([_fmt(getattr(r, f)) for f in RECORD_FIELDS])
    return buf.getvalue()


def read_records(path: str | Path) -> list[EvaluationRecord]:
    """Parse a ``results.csv`` written by :func:`run_matrix`."""
    types = {f.name: f.type for f in fields(EvaluationRecord)}
    cast = {"float": float, "int": int, "str": str}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [EvaluationRecord(**{k: cast[types[k]](v) for k, v in row.items()}) for row in rows]


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def report_metadata(cfg: ExperimentConfig, results: list[CellResult]) -> dict:
    model_hashes = {mid: file_hash(p) for mid, p in cfg.models.items() if Path(p).is_file()}
    return {
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "model_sha256": model_hashes,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "torch": torch.__version__,
            "pillow": PIL.__version__,
            "libjpeg": features.version("jpg"),
        },
        "notes": [
            "robustness columns post-process the protected input after an 8-bit save",
            f"cf_rrc is the mean over {cfg.robustness.rrc_draws} seeded crops per image",
            "disabled robustness columns are reported as nan",
            "cf_reduction_pct is computed from the seed-averaged CF columns",
        ],
        "cells": [
            {
                "source_model": r.record.source_model,
                "attack_model": r.record.attack_model,
                "attack_type": r.record.attack_type,
                "per_seed": r.per_seed,
                "per_seed_std": {k: float(np.std(v)) for k, v in r.per_seed.items()},
                "flags": r.flags,
            }
            for r in results
        ],
    }


def records_to_json(records: list[EvaluationRecord], metadata: dict) -> str:
    payload = {"metadata": metadata, "records": [asdict(r) for r in records]}
    return json.dumps(_json_safe(payload), indent=2, sort_keys=False)


_DISPLAY = {"random": "Random", "na": "NA", "na-mask": "NA-Mask", "pachroma": "PAChroma"}


def summary_table(records: list[EvaluationRecord]) -> str:
    head = (f"{'Source':<12} {'Attack model':<12} {'Type':<9} {'CF':>7} {'Prot. CF':>17} "
            f"{'PSNR out':>8} {'PSNR in':>8} {'SSIM in':>7} {'JPEG75':>7} {'JPEG50':>7} {'RRC':>7}")
    lines = [head, "-" * len(head)]
    for r in records:
        prot = f"{r.cf_protected:.2f} ({-r.cf_reduction_pct:+.2f}%)"
        lines.append(
            f"{r.source_model:<12} {r.attack_model:<12} {_DISPLAY.get(r.attack_type, r.attack_type):<9} "
            f"{r.cf_unprotected:7.2f} {prot:>17} {r.psnr_output_db:8.2f} {r.psnr_input_db:8.2f} "
            f"{r.ssim_input:7.3f} {r.cf_jpeg75:7.2f} {r.cf_jpeg50:7.2f} {r.cf_rrc:7.2f}")
    return "\n".join(lines)
