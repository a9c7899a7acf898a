"""Shared toy setup: photo-patch corpus, three trained colorizers, acceptance log.

Training takes minutes on one CPU core, so the models are cached on disk
(``UNCOLORABLE_TOY_CACHE``, default ``<repo>/.toy_cache``) and rebuilt only
when the settings below change.
"""

import hashlib
import json
import os
from pathlib import Path

import numpy as np
import pytest

from uncolorable.colorizers import load_model, save_model, train_colorizer
from uncolorable.data import photo_patch_corpus, write_corpus
from uncolorable.image_core import to_grayscale

TOY = {
    "corpus_seed": 0,
    "n_train": 500,
    "n_test": 100,
    "size": 64,
    "epochs": 120,
    "input_noise": 0.04,
    "models": {"small_cnn": 0, "dilated_cnn": 1, "attn_unet": 2},
}

CACHE = Path(os.environ.get("UNCOLORABLE_TOY_CACHE", Path(__file__).resolve().parents[1] / ".toy_cache"))

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def _settings_key() -> str:
    return hashlib.sha256(json.dumps(TOY, sort_keys=True).encode()).hexdigest()[:16]


@pytest.fixture(scope="session")
def toy_dir() -> Path:
    d = CACHE / _settings_key()
    d.mkdir(parents=True, exist_ok=True)
    return d


@pytest.fixture(scope="session")
def toy_split(toy_dir):
    colors = photo_patch_corpus(TOY["n_train"] + TOY["n_test"], TOY["size"], TOY["corpus_seed"])
    grays = np.stack([to_grayscale(c) for c in colors])
    n = TOY["n_train"]
    test_dir = toy_dir / "test_images"
    if not test_dir.is_dir() or len(list(test_dir.iterdir())) != TOY["n_test"]:
        write_corpus(colors[n:], test_dir)
    return {
        "train_grays": grays[:n], "train_colors": colors[:n],
        "test_grays": grays[n:], "test_colors": colors[n:],
        "test_dir": test_dir,
    }


@pytest.fixture(scope="session")
def model_paths(toy_dir, toy_split):
    paths = {}
    for arch, seed in TOY["models"].items():
        p = toy_dir / f"{arch}.bin"
        if not p.is_file():
            model = train_colorizer(arch, toy_split["train_grays"], toy_split["train_colors"],
                                    epochs=TOY["epochs"], seed=seed,
                                    input_noise=TOY["input_noise"])
            save_model(model, p)
        paths[arch] = p
    return paths


@pytest.fixture(scope="session")
def trained_models(model_paths):
    return {arch: load_model(p) for arch, p in model_paths.items()}


@pytest.fixture
def acceptance():
    def record(n: int, passed: bool, detail: str):
        ACCEPTANCE[n] = (bool(passed), detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
