"""Colorfulness-minimizing perturbations.

One momentum sign-gradient loop covers every optimized attack:

==========  =========  ===============
preset      mask       transforms
==========  =========  ===============
na          off        off
na-mask     on         off
pachroma    on         on (N copies)
==========  =========  ===============

Each iteration averages the colorfulness gradient over the transformed
copies, folds the L1-normalized average into the momentum buffer, and steps
``x <- x - mask * alpha * sign(g)``, followed by projection onto the budget
ball around the clean image and the [0, 1] range. The step descends because
the colorfulness is the quantity being minimized.

``random`` draws uniform noise in the budget with no optimization.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import torch

from .colorizers import Colorizer, ColorizerModel
from .masking import apply_mask, laplacian_mask
from .metrics import colorfulness, colorfulness_torch
from .transforms import TransformConfig, copy_seeds, sia_transform, sia_transform_torch

log = logging.getLogger(__name__)

PRESETS = ("random", "na", "na-mask", "pachroma")
NORMS = ("linf", "l2")
GRADIENT_MODES = ("through", "straight")

# keeps per-iteration transform seeds disjoint: iteration t, copy i -> base + t * stride + i
_ITER_SEED_STRIDE = 1_000


@dataclass(frozen=True)
class AttackConfig:
    """Parameters of one attack run.

    ``alpha`` defaults to ``epsilon / 10``. ``transform_gradient`` selects
    whether gradients are taken through the block transforms (``through``)
    or w.r.t. each transformed copy and applied unchanged to the shared image
    (``straight``); models that only expose :meth:`input_gradient` always
    use the latter.
    """

    epsilon: float = 16 / 255
    alpha: float | None = None
    iterations: int = 100
    momentum: float = 1.0
    n_copies: int = 20
    split: int = 3
    use_mask: bool = True
    use_transforms: bool = True
    norm: str = "linf"
    seed: int = 0
    kind: str = "pachroma"
    transform_gradient: str = "through"
    transforms: TransformConfig = field(default_factory=TransformConfig)

    def __post_init__(self):
        if self.alpha is None:
            object.__setattr__(self, "alpha", self.epsilon / 10)
        if not 0 <= self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.alpha < 0 or self.alpha > self.epsilon:
            raise ValueError(f"alpha must lie in [0, epsilon], got {self.alpha}")
        if self.iterations < 1 or self.n_copies < 1 or self.split < 1:
            raise ValueError("iterations, n_copies and split must all be >= 1")
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}, got {self.norm!r}")
        if self.kind not in PRESETS:
            raise ValueError(f"kind must be one of {PRESETS}, got {self.kind!r}")
        if self.transform_gradient not in GRADIENT_MODES:
            raise ValueError(f"transform_gradient must be one of {GRADIENT_MODES}")

    @classmethod
    def preset(cls, name: str, **overrides) -> "AttackConfig":
        """Config for a named attack type (case-insensitive)."""
        key = name.strip().lower().replace("_", "-")
        if key not in PRESETS:
            raise ValueError(f"unknown attack preset {name!r}; choose from {PRESETS}")
        flags = {
            "random": dict(use_mask=False, use_transforms=False),
            "na": dict(use_mask=False, use_transforms=False),
            "na-mask": dict(use_mask=True, use_transforms=False),
            "pachroma": dict(use_mask=True, use_transforms=True),
        }[key]
        return cls(kind=key, **{**flags, **overrides})

    def with_seed(self, seed: int) -> "AttackConfig":
        return replace(self, seed=seed)


@dataclass
class AttackResult:
    adversarial: np.ndarray
    perturbation: np.ndarray
    cf_trace: list[float]
    iterations_run: int
    degenerate_events: int = 0
    cf_initial: float = math.nan


class AttackError(RuntimeError):
    pass


def l2_project(delta: np.ndarray, radius: float) -> np.ndarray:
    """Scale ``delta`` onto the L2 ball of ``radius`` if it lies outside."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    norm = float(np.sqrt(np.sum(np.square(delta))))
    if norm > radius:
        return delta * (radius / norm)
    return delta


def project(x_new: np.ndarray, x0: np.ndarray, epsilon: float, norm: str = "linf") -> np.ndarray:
    """Budget projection around ``x0`` followed by the [0, 1] range clip."""
    if norm == "linf":
        delta = np.clip(x_new - x0, -epsilon, epsilon)
    elif epsilon > 0:
        delta = l2_project(x_new - x0, epsilon)
    else:
        delta = np.zeros_like(x0)
    x = np.clip(x0 + delta, 0.0, 1.0)
    if norm == "linf":
        # x0 + delta can round a few ulps past the budget; walk those pixels back
        over = np.abs(x - x0) > epsilon
        while over.any():
            x[over] = np.nextafter(x[over], x0[over])
            over = np.abs(x - x0) > epsilon
    return x


def _torch_gradient(model: Colorizer, x: np.ndarray, cfg: AttackConfig,
                    seeds: list[int] | None) -> tuple[np.ndarray, int]:
    xt = torch.as_tensor(x, dtype=model.dtype).clone().requires_grad_(True)
    if seeds is None:
        batch = xt[None]
    else:
        batch = torch.stack([sia_transform_torch(xt, cfg.split, s, cfg.transforms) for s in seeds])
    cf, degenerate = colorfulness_torch(model.forward_tensor(batch))
    n_degen = int(degenerate.sum())
    if n_degen == len(cf):
        return np.zeros(x.shape), n_degen
    (grad,) = torch.autograd.grad(cf.sum() / len(cf), xt)
    return grad.to(torch.float64).numpy(), n_degen


def _straight_gradient(model: ColorizerModel, x: np.ndarray, cfg: AttackConfig,
                       seeds: list[int] | None) -> tuple[np.ndarray, int]:
    copies = [x] if seeds is None else [sia_transform(x, cfg.split, s, cfg.transforms) for s in seeds]
    total = np.zeros(x.shape)
    n_degen = 0
    # ordered summation keeps the result independent of evaluation order
    for c in copies:
        res = model.input_gradient(c)
        total += res.grad
        n_degen += int(res.degenerate)
    return total / len(copies), n_degen


def averaged_gradient(model: ColorizerModel, x: np.ndarray, cfg: AttackConfig,
                      iteration: int) -> tuple[np.ndarray, int]:
    """Mean colorfulness gradient over this iteration's transformed copies."""
    seeds = None
    if cfg.use_transforms:
        seeds = copy_seeds(cfg.seed * _ITER_SEED_STRIDE**2 + iteration * _ITER_SEED_STRIDE, cfg.n_copies)
    if isinstance(model, Colorizer) and cfg.transform_gradient == "through":
        return _torch_gradient(model, x, cfg, seeds)
    return _straight_gradient(model, x, cfg, seeds)


def _output_cf(model: ColorizerModel, x: np.ndarray) -> float:
    return colorfulness(model.forward(x))


def momentum_attack(model: ColorizerModel, x: np.ndarray, cfg: AttackConfig,
                    callback: Callable[[int, np.ndarray], None] | None = None) -> AttackResult:
    """Run the momentum sign-gradient loop under ``cfg``'s mask/transform flags.

    ``callback(t, x_adv)`` is invoked after every iteration, which is how the
    budget invariant is checked per step.
    """
    x0 = np.asarray(x, dtype=np.float64)
    mask = laplacian_mask(x0) if cfg.use_mask else np.ones_like(x0)
    g = np.zeros_like(x0)
    x_adv = x0.copy()
    trace: list[float] = []
    degenerate_events = 0
    cf_initial = _output_cf(model, x0)

    for t in range(cfg.iterations):
        try:
            grad, n_degen = averaged_gradient(model, x_adv, cfg, t)
        except Exception as exc:
            raise AttackError(f"gradient evaluation failed at iteration {t}: {exc}") from exc
        if not np.isfinite(grad).all():
            raise AttackError(f"non-finite gradient at iteration {t} "
                              f"({int((~np.isfinite(grad)).sum())} bad pixels)")
        degenerate_events += n_degen

        l1 = np.abs(grad).sum()
        g = cfg.momentum * g + (grad / l1 if l1 > 0 else 0.0)
        step = apply_mask(cfg.alpha * np.sign(g), mask)
        x_adv = project(x_adv - step, x0, cfg.epsilon, cfg.norm)

        trace.append(_output_cf(model, x_adv))
        if callback is not None:
            callback(t, x_adv)

    if degenerate_events:
        log.info("%d degenerate colorfulness gradients (gray outputs)", degenerate_events)
    return AttackResult(x_adv, x_adv - x0, trace, cfg.iterations, degenerate_events, cf_initial)


def pachroma(model: ColorizerModel, x: np.ndarray, cfg: AttackConfig | None = None,
             callback: Callable[[int, np.ndarray], None] | None = None) -> AttackResult:
    """Masked, transform-averaged momentum attack (defaults: eps 16/255, T 100, N 20, s 3)."""
    return momentum_attack(model, x, cfg or AttackConfig.preset("pachroma"), callback)


def nullifying_attack(model: ColorizerModel, x: np.ndarray, cfg: AttackConfig | None = None,
                      callback: Callable[[int, np.ndarray], None] | None = None) -> AttackResult:
    """The plain momentum attack: no mask, no transforms."""
    cfg = replace(cfg or AttackConfig(), kind="na", use_mask=False, use_transforms=False)
    return momentum_attack(model, x, cfg, callback)


def random_baseline(x: np.ndarray, cfg: AttackConfig | None = None) -> AttackResult:
    """Uniform noise in ``[-eps, eps]`` per pixel, clipped to [0, 1]."""
    cfg = cfg or AttackConfig.preset("random")
    x0 = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    noise = rng.uniform(-cfg.epsilon, cfg.epsilon, size=x0.shape)
    if cfg.norm == "l2" and cfg.epsilon > 0:
        noise = l2_project(noise, cfg.epsilon)
    x_adv = np.clip(x0 + noise, 0.0, 1.0)
    return AttackResult(x_adv, x_adv - x0, [], 0)


def run_attack(model: ColorizerModel, x: np.ndarray, cfg: AttackConfig,
               callback: Callable[[int, np.ndarray], None] | None = None) -> AttackResult:
    """Dispatch on ``cfg.kind``."""
    if cfg.kind == "random":
        return random_baseline(x, cfg)
    return momentum_attack(model, x, cfg, callback)
