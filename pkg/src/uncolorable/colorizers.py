"""Small differentiable colorizers, their training loop and file format.

Three architectures with different inductive biases stand in for production
colorizers so that white-box and transfer (black-box) settings can both be
exercised:

* ``small_cnn``   plain 3x3 conv stack
* ``dilated_cnn`` dilated conv stack with a wide receptive field
* ``attn_unet``   two-level U-Net with a self-attention bottleneck

Every model maps a ``(H, W)`` grayscale image to ``(H, W, 3)`` RGB through a
final sigmoid, so outputs are always in [0, 1].

Model container layout (little endian)::

    b"UNCLRMDL"            8-byte magic
    uint32                 header length in bytes
    header                 UTF-8 JSON: schema_version, arch, hparams, seed,
                           corpus_hash, history, tensors=[{name, shape}, ...]
    float32 blobs          one per entry of ``tensors``, in that order,
                           C-contiguous
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import struct
from pathlib import Path
from typing import NamedTuple, Protocol, runtime_checkable

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .metrics import colorfulness_torch

log = logging.getLogger(__name__)

MIN_INPUT_SIDE = 32
MAGIC = b"UNCLRMDL"
SCHEMA_VERSION = 1
# fixed luminance skip into the output logits; the network only has to learn chroma
LUMA_SKIP_GAIN = 4.0


class ModelFormatError(ValueError):
    """Raised for corrupt, mismatched or unsupported model files."""


class GradientResult(NamedTuple):
    grad: np.ndarray
    cf: float
    degenerate: bool


@runtime_checkable
class ColorizerModel(Protocol):
    """What the attack engine and evaluation harness need from a colorizer.

    Wrappers around external pretrained models implement these two methods;
    none ship with this package.
    """

    def forward(self, x: np.ndarray) -> np.ndarray: ...

    def input_gradient(self, x: np.ndarray) -> GradientResult: ...


class ExternalColorizer:
    """Adapter slot for a pretrained colorizer living outside this package.

    Anything with ``forward`` and ``input_gradient`` as in
    :class:`ColorizerModel` can be attacked and evaluated; this class only
    marks where such a wrapper would go.
    """

    def __init__(self, name: str):
        self.name = name

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"no adapter implemented for {self.name!r}")

    def input_gradient(self, x: np.ndarray) -> GradientResult:
        raise NotImplementedError(f"no adapter implemented for {self.name!r}")


def _conv(cin, cout, dilation=1):
    return nn.Conv2d(cin, cout, 3, padding=dilation, dilation=dilation)


class SmallCNN(nn.Module):
    def __init__(self, width: int = 32, depth: int = 6):
        super().__init__()
        layers = [_conv(1, width), nn.ReLU()]
        for _ in range(depth - 2):
            layers += [_conv(width, width), nn.ReLU()]
        layers.append(_conv(width, 3))
        self.body = nn.Sequential(*layers)

    def forward(self, x):
        return self.body(x)


class DilatedCNN(nn.Module):
    def __init__(self, width: int = 32, dilations: tuple[int, ...] = (1, 2, 4, 8, 4, 2, 1)):
        super().__init__()
        layers = [_conv(1, width), nn.ReLU()]
        for d in dilations:
            layers += [_conv(width, width, d), nn.ReLU()]
        layers.append(nn.Conv2d(width, 3, 1))
        self.body = nn.Sequential(*layers)

    def forward(self, x):
        return self.body(x)


class AttnUNet(nn.Module):
    def __init__(self, width: int = 16, heads: int = 4):
        super().__init__()
        w1, w2, w3 = width, 2 * width, 4 * width
        self.enc1 = nn.Sequential(_conv(1, w1), nn.ReLU(), _conv(w1, w1), nn.ReLU())
        self.enc2 = nn.Sequential(_conv(w1, w2), nn.ReLU(), _conv(w2, w2), nn.ReLU())
        self.enc3 = nn.Sequential(_conv(w2, w3), nn.ReLU())
        self.norm = nn.LayerNorm(w3)
        self.attn = nn.MultiheadAttention(w3, heads, batch_first=True)
        self.dec2 = nn.Sequential(_conv(w3 + w2, w2), nn.ReLU())
        self.dec1 = nn.Sequential(_conv(w2 + w1, w1), nn.ReLU())
        self.head = nn.Conv2d(w1, 3, 1)

    def forward(self, x):
        e1 = self.enc1(x)
        e2 = self.enc2(F.avg_pool2d(e1, 2))
        e3 = self.enc3(F.avg_pool2d(e2, 2))
        b, c, h, w = e3.shape
        tokens = e3.flatten(2).transpose(1, 2)
        q = self.norm(tokens)
        tokens = tokens + self.attn(q, q, q, need_weights=False)[0]
        e3 = tokens.transpose(1, 2).reshape(b, c, h, w)
        d2 = F.interpolate(e3, size=e2.shape[2:], mode="bilinear", align_corners=False)
        d2 = self.dec2(torch.cat([d2, e2], 1))
        d1 = F.interpolate(d2, size=e1.shape[2:], mode="bilinear", align_corners=False)
        d1 = self.dec1(torch.cat([d1, e1], 1))
        return self.head(d1)


ARCHITECTURES = {
    "small_cnn": SmallCNN,
    "dilated_cnn": DilatedCNN,
    "attn_unet": AttnUNet,
}


class ColorNet(nn.Module):
    """Wraps an architecture body with the luminance skip and output sigmoid."""

    def __init__(self, body: nn.Module):
        super().__init__()
        self.body = body

    def forward(self, x):
        return torch.sigmoid(self.body(x) + LUMA_SKIP_GAIN * (x - 0.5))


def build_net(arch: str, seed: int = 0, **hparams) -> nn.Module:
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch!r}; choose from {sorted(ARCHITECTURES)}")
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return ColorNet(ARCHITECTURES[arch](**hparams))


class Colorizer:
    """A trained (or freshly initialised) colorizer held in evaluation mode.

    ``net`` maps ``(B, 1, H, W)`` tensors to ``(B, 3, H, W)``. Any
    ``nn.Module`` with that contract can be wrapped, which is how the tests
    build constant and identity colorizers.
    """

    def __init__(self, net: nn.Module, arch: str = "custom", hparams: dict | None = None,
                 seed: int = 0, corpus_hash: str = "", history: list[float] | None = None):
        self.net = net.eval()
        for p in self.net.parameters():
            p.requires_grad_(False)
        self.arch = arch
        self.hparams = dict(hparams or {})
        self.seed = seed
        self.corpus_hash = corpus_hash
        self.history = list(history or [])

    def __repr__(self):
        return f"Colorizer(arch={self.arch!r}, seed={self.seed}, params={self.n_params})"

    @property
    def n_params(self) -> int:
        return sum(p.numel() for p in self.net.parameters())

    @property
    def dtype(self) -> torch.dtype:
        p = next(self.net.parameters(), None)
        return p.dtype if p is not None else torch.float32

    def to(self, dtype: torch.dtype) -> "Colorizer":
        """A copy with weights cast to ``dtype`` (float64 is handy for finite differences)."""
        net = copy.deepcopy(self.net).to(dtype)
        return Colorizer(net, self.arch, self.hparams, self.seed, self.corpus_hash, self.history)

    def _tensor(self, x: np.ndarray) -> torch.Tensor:
        x = np.asarray(x)
        if x.ndim != 2:
            raise ValueError(f"colorizer input must be a 2-D grayscale image, got shape {x.shape}")
        if min(x.shape) < MIN_INPUT_SIDE:
            raise ValueError(f"colorizer input sides must be >= {MIN_INPUT_SIDE}, got {x.shape}")
        return torch.as_tensor(x, dtype=self.dtype)

    def forward_tensor(self, xt: torch.Tensor) -> torch.Tensor:
        """``(B, H, W)`` grayscale batch to ``(B, 3, H, W)`` RGB, differentiable."""
        return self.net(xt[:, None])

    def forward(self, x: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            out = self.forward_tensor(self._tensor(x)[None])[0]
        return out.permute(1, 2, 0).to(torch.float64).numpy()

    def forward_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs)
        if xs.ndim != 3 or min(xs.shape[1:]) < MIN_INPUT_SIDE:
            raise ValueError(f"expected (B, H, W) batch with sides >= {MIN_INPUT_SIDE}, got {xs.shape}")
        with torch.no_grad():
            out = self.forward_tensor(torch.as_tensor(xs, dtype=self.dtype))
        return out.permute(0, 2, 3, 1).to(torch.float64).numpy()

    def input_gradient(self, x: np.ndarray) -> GradientResult:
        """Gradient of the output colorfulness w.r.t. every input pixel.

        At the degenerate point (both opponent-channel deviations zero) the
        gradient is reported as zeros and ``degenerate`` is set.
        """
        xt = self._tensor(x).clone().requires_grad_(True)
        cf, degenerate = colorfulness_torch(self.forward_tensor(xt[None]))
        if bool(degenerate[0]):
            log.debug("degenerate colorfulness gradient at a gray output")
            return GradientResult(np.zeros(xt.shape), float(cf[0].detach()), True)
        (grad,) = torch.autograd.grad(cf.sum(), xt)
        return GradientResult(grad.to(torch.float64).numpy(), float(cf[0].detach()), False)


def corpus_hash(grays: np.ndarray, colors: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(grays, dtype="<f4").tobytes())
    h.update(np.ascontiguousarray(colors, dtype="<f4").tobytes())
    return h.hexdigest()


def gray_baseline_l1(grays: np.ndarray, colors: np.ndarray) -> float:
    """L1 error of the trivial colorizer that outputs R = G = B = input."""
    grays = np.asarray(grays, dtype=np.float64)
    return float(np.abs(np.asarray(colors) - grays[..., None]).mean())


def l1_error(model: Colorizer, grays: np.ndarray, colors: np.ndarray, batch_size: int = 64) -> float:
    total = 0.0
    for i in range(0, len(grays), batch_size):
        pred = model.forward_batch(grays[i:i + batch_size])
        total += np.abs(pred - colors[i:i + batch_size]).sum()
    return float(total / np.asarray(colors).size)


def train_colorizer(arch: str, grays: np.ndarray, colors: np.ndarray, epochs: int = 30,
                    seed: int = 0, lr: float = 2e-3, batch_size: int = 16,
                    hparams: dict | None = None, input_noise: float = 0.0) -> Colorizer:
    """Fit a colorizer to ``(gray, color)`` pairs with per-pixel L1 loss.

    ``grays`` is ``(N, H, W)`` and ``colors`` is ``(N, H, W, 3)``, both in
    [0, 1]. Training is deterministic for a fixed seed on one machine.
    ``input_noise > 0`` adds Gaussian noise with a per-image standard
    deviation drawn from ``U(0, input_noise)`` to the gray inputs.
    """
    grays = np.asarray(grays, dtype=np.float32)
    colors = np.asarray(colors, dtype=np.float32)
    if len(grays) == 0:
        raise ValueError("training corpus is empty")
    if grays.shape != colors.shape[:3] or colors.shape[-1] != 3:
        raise ValueError(f"corpus shapes do not pair up: {grays.shape} vs {colors.shape}")
    if len(grays) < 200:
        log.warning("training on only %d pairs", len(grays))

    hparams = dict(hparams or {})
    net = build_net(arch, seed, **hparams)
    chash = corpus_hash(grays, colors)
    history: list[float] = []
    if epochs > 0:
        x_all = torch.from_numpy(grays)[:, None]
        y_all = torch.from_numpy(colors).permute(0, 3, 1, 2)
        opt = torch.optim.Adam(net.parameters(), lr=lr)
        rng = np.random.default_rng(seed)
        noise_gen = torch.Generator().manual_seed(seed)
        net.train()
        for epoch in range(epochs):
            order = torch.from_numpy(rng.permutation(len(grays)))
            running = 0.0
            for i in range(0, len(order), batch_size):
                idx = order[i:i + batch_size]
                x = x_all[idx]
                if input_noise > 0:
                    std = torch.rand(len(idx), 1, 1, 1, generator=noise_gen) * input_noise
                    x = (x + std * torch.randn(x.shape, generator=noise_gen)).clamp(0, 1)
                loss = F.l1_loss(net(x), y_all[idx])
                opt.zero_grad()
                loss.backward()
                opt.step()
                running += loss.item() * len(idx)
            history.append(running / len(grays))
            log.info("%s epoch %d/%d  L1 %.4f", arch, epoch + 1, epochs, history[-1])
    return Colorizer(net, arch, hparams, seed, chash, history)


def save_model(model: Colorizer, path: str | Path) -> None:
    state = model.net.state_dict()
    header = {
        "schema_version": SCHEMA_VERSION,
        "arch": model.arch,
        "hparams": model.hparams,
        "seed": model.seed,
        "corpus_hash": model.corpus_hash,
        "history": model.history,
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in state.items()],
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        for v in state.values():
            fh.write(np.ascontiguousarray(v.detach().cpu().numpy(), dtype="<f4").tobytes())


def read_header(path: str | Path) -> tuple[dict, bytes]:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:8] != MAGIC:
        raise ModelFormatError(f"{path}: not a colorizer model file")
    (hlen,) = struct.unpack("<I", data[8:12])
    try:
        header = json.loads(data[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: corrupt header") from exc
    return header, data[12 + hlen:]


def load_model(path: str | Path, arch: str | None = None) -> Colorizer:
    """Load a model file; ``arch`` optionally asserts the expected architecture."""
    header, blob = read_header(path)
    version = header.get("schema_version")
    if not isinstance(version, int) or version > SCHEMA_VERSION:
        raise ModelFormatError(
            f"{path}: schema version {version} is not supported (max {SCHEMA_VERSION})")
    file_arch = header.get("arch")
    if arch is not None and file_arch != arch:
        raise ModelFormatError(f"{path}: expected architecture {arch!r}, file holds {file_arch!r}")
    if file_arch not in ARCHITECTURES:
        raise ModelFormatError(f"{path}: unknown architecture {file_arch!r}")

    net = build_net(file_arch, **header.get("hparams", {}))
    state = net.state_dict()
    specs = header.get("tensors", [])
    if [t["name"] for t in specs] != list(state):
        raise ModelFormatError(f"{path}: tensor layout does not match {file_arch!r}")
    offset = 0
    loaded = {}
    for t in specs:
        shape = tuple(t["shape"])
        if shape != tuple(state[t["name"]].shape):
            raise ModelFormatError(f"{path}: tensor {t['name']} has shape {shape}")
        n = int(np.prod(shape)) * 4
        if offset + n > len(blob):
            raise ModelFormatError(f"{path}: truncated weight data")
        arr = np.frombuffer(blob, dtype="<f4", count=n // 4, offset=offset).reshape(shape)
        loaded[t["name"]] = torch.from_numpy(arr.astype(np.float32))
        offset += n
    if offset != len(blob):
        raise ModelFormatError(f"{path}: {len(blob) - offset} trailing bytes")
    net.load_state_dict(loaded)
    return Colorizer(net, file_arch, header.get("hparams", {}), header.get("seed", 0),
                     header.get("corpus_hash", ""), header.get("history", []))


def file_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
