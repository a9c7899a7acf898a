import json
import struct

import numpy as np
import pytest
import torch
import torch.nn as nn

from uncolorable.colorizers import (
    ARCHITECTURES,
    MAGIC,
    Colorizer,
    ColorizerModel,
    ModelFormatError,
    build_net,
    gray_baseline_l1,
    l1_error,
    load_model,
    read_header,
    save_model,
    train_colorizer,
)
from uncolorable.metrics import colorfulness

from .helpers import ConstantGray, GrayIdentity, fd_input_gradient, relative_l2


@pytest.fixture(params=sorted(ARCHITECTURES))
def fresh_model(request):
    return Colorizer(build_net(request.param, seed=3), request.param, seed=3)


def test_untrained_output_contract(fresh_model):
    x = np.random.default_rng(0).random((40, 36))
    out = fresh_model.forward(x)
    assert out.shape == (40, 36, 3)
    assert out.min() >= 0 and out.max() <= 1
    assert np.array_equal(out, fresh_model.forward(x))
    assert isinstance(fresh_model, ColorizerModel)


def test_undersized_input_rejected(fresh_model):
    with pytest.raises(ValueError):
        fresh_model.forward(np.zeros((31, 40)))
    with pytest.raises(ValueError):
        fresh_model.input_gradient(np.zeros((16, 16)))


@pytest.mark.parametrize("arch", sorted(ARCHITECTURES))
def test_input_gradient_matches_finite_differences(arch):
    model = Colorizer(build_net(arch, seed=1), arch).to(torch.float64)
    x = np.random.default_rng(1).uniform(0.05, 0.95, (32, 32))
    res = model.input_gradient(x)
    assert not res.degenerate
    assert res.grad.shape == x.shape
    fd = fd_input_gradient(model, x, 1e-3)
    assert relative_l2(res.grad, fd) < 1e-2


def test_constant_gray_model_has_zero_gradient():
    model = Colorizer(ConstantGray(), "constant")
    res = model.input_gradient(np.random.default_rng(2).random((32, 32)))
    assert res.degenerate
    assert np.all(res.grad == 0)


def test_identity_colorizer_gradient_is_zero():
    model = Colorizer(GrayIdentity(), "identity").to(torch.float64)
    x = np.random.default_rng(3).uniform(0.1, 0.9, (32, 32))
    res = model.input_gradient(x)
    assert res.degenerate and np.all(res.grad == 0)
    fd = fd_input_gradient(model, x, 1e-3)
    assert np.all(fd == 0)


def _tiny_corpus(n=24, size=32, seed=0):
    rng = np.random.default_rng(seed)
    grays = rng.random((n, size, size))
    colors = np.stack([grays * 0.9, grays * 0.5, 1 - grays], axis=-1)
    return grays, colors


def test_zero_epochs_returns_initialization():
    g, c = _tiny_corpus()
    model = train_colorizer("small_cnn", g, c, epochs=0, seed=4)
    ref = build_net("small_cnn", seed=4)
    for a, b in zip(model.net.state_dict().values(), ref.state_dict().values()):
        assert torch.equal(a, b)
    assert model.history == []


def test_training_is_reproducible_and_learns():
    g, c = _tiny_corpus()
    a = train_colorizer("small_cnn", g, c, epochs=3, seed=5, hparams={"width": 8, "depth": 3})
    b = train_colorizer("small_cnn", g, c, epochs=3, seed=5, hparams={"width": 8, "depth": 3})
    for x, y in zip(a.net.state_dict().values(), b.net.state_dict().values()):
        assert torch.equal(x, y)
    assert len(a.history) == 3 and a.history[-1] < a.history[0]
    assert a.corpus_hash == b.corpus_hash and len(a.corpus_hash) == 64


def test_input_noise_training_is_seeded():
    g, c = _tiny_corpus()
    kw = dict(epochs=2, seed=5, hparams={"width": 8, "depth": 3})
    a = train_colorizer("small_cnn", g, c, input_noise=0.05, **kw)
    b = train_colorizer("small_cnn", g, c, input_noise=0.05, **kw)
    clean = train_colorizer("small_cnn", g, c, **kw)
    assert a.history == b.history
    assert a.history != clean.history


def test_training_errors():
    with pytest.raises(ValueError):
        train_colorizer("small_cnn", np.zeros((0, 32, 32)), np.zeros((0, 32, 32, 3)))
    g, c = _tiny_corpus(4)
    with pytest.raises(ValueError):
        train_colorizer("no_such_arch", g, c, epochs=1)


def test_l1_helpers():
    g, c = _tiny_corpus(4)
    assert gray_baseline_l1(g, np.repeat(g[..., None], 3, -1)) == 0.0
    model = Colorizer(GrayIdentity(), "identity")
    assert l1_error(model, g, c) == pytest.approx(gray_baseline_l1(g, c), rel=1e-6)


def test_save_load_roundtrip(tmp_path, fresh_model):
    p = tmp_path / "m.bin"
    save_model(fresh_model, p)
    loaded = load_model(p, arch=fresh_model.arch)
    probe = np.random.default_rng(6).random((48, 40))
    assert np.array_equal(loaded.forward(probe), fresh_model.forward(probe))
    assert loaded.arch == fresh_model.arch and loaded.seed == 3


def test_file_layout(tmp_path):
    model = Colorizer(build_net("small_cnn", width=4, depth=3), "small_cnn", {"width": 4, "depth": 3})
    p = tmp_path / "m.bin"
    save_model(model, p)
    data = p.read_bytes()
    assert data[:8] == MAGIC
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + hlen])
    n_floats = sum(int(np.prod(t["shape"])) for t in header["tensors"])
    assert len(data) == 12 + hlen + 4 * n_floats
    first = header["tensors"][0]
    w = np.frombuffer(data, "<f4", count=int(np.prod(first["shape"])), offset=12 + hlen)
    ref = model.net.state_dict()[first["name"]].numpy().ravel()
    assert np.array_equal(w, ref)


def _rewrite_header(path, **changes):
    header, blob = read_header(path)
    header.update(changes)
    raw = json.dumps(header).encode()
    path.write_bytes(MAGIC + struct.pack("<I", len(raw)) + raw + blob)


def test_load_errors(tmp_path, fresh_model):
    p = tmp_path / "m.bin"
    save_model(fresh_model, p)
    other = "small_cnn" if fresh_model.arch != "small_cnn" else "attn_unet"
    with pytest.raises(ModelFormatError):
        load_model(p, arch=other)

    future = tmp_path / "future.bin"
    future.write_bytes(p.read_bytes())
    _rewrite_header(future, schema_version=99)
    with pytest.raises(ModelFormatError, match="schema version 99"):
        load_model(future)

    corrupt = tmp_path / "corrupt.bin"
    corrupt.write_bytes(b"garbage" * 4)
    with pytest.raises(ModelFormatError):
        load_model(corrupt)

    truncated = tmp_path / "trunc.bin"
    truncated.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(ModelFormatError):
        load_model(truncated)

    relabeled = tmp_path / "relabel.bin"
    relabeled.write_bytes(p.read_bytes())
    _rewrite_header(relabeled, arch=other)
    with pytest.raises(ModelFormatError):
        load_model(relabeled)


def test_trained_colorizer_is_colorful(trained_models, toy_split):
    grays = toy_split["test_grays"][:10]
    for model in trained_models.values():
        cfs = [colorfulness(model.forward(g)) for g in grays]
        assert np.mean(cfs) >= 10


def test_trained_colorizer_beats_gray_baseline(trained_models, toy_split):
    g, c = toy_split["test_grays"], toy_split["test_colors"]
    for model in trained_models.values():
        assert l1_error(model, g, c) < gray_baseline_l1(g, c)


def test_external_adapter_is_only_declared():
    from uncolorable.colorizers import ExternalColorizer

    ext = ExternalColorizer("deoldify")
    assert isinstance(ext, ColorizerModel)
    with pytest.raises(NotImplementedError):
        ext.forward(np.zeros((32, 32)))
