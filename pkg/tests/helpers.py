import numpy as np
import torch
import torch.nn as nn

from uncolorable.metrics import colorfulness_torch


class ConstantGray(nn.Module):
    """Ignores its input and emits mid-gray."""

    def __init__(self):
        super().__init__()
        self.dummy = nn.Parameter(torch.zeros(()))

    def forward(self, x):
        return torch.full((x.shape[0], 3, *x.shape[2:]), 0.5, dtype=x.dtype) + 0 * self.dummy


class GrayIdentity(nn.Module):
    """R = G = B = input."""

    def __init__(self):
        super().__init__()
        self.dummy = nn.Parameter(torch.zeros(()))

    def forward(self, x):
        return x.repeat(1, 3, 1, 1) + 0 * self.dummy


def fd_input_gradient(model, x, step, chunk=512):
    """Central differences of output colorfulness w.r.t. every input pixel."""
    h, w = x.shape
    n = h * w
    base = torch.as_tensor(x, dtype=torch.float64)
    grad = np.empty(n)
    with torch.no_grad():
        for start in range(0, n, chunk):
            idx = torch.arange(start, min(start + chunk, n))
            batch = base.repeat(2 * len(idx), 1, 1).reshape(2 * len(idx), n)
            batch[torch.arange(len(idx)), idx] += step
            batch[torch.arange(len(idx)) + len(idx), idx] -= step
            out = model.forward_tensor(batch.reshape(-1, h, w).to(model.dtype))
            cf, _ = colorfulness_torch(out)
            grad[start:start + len(idx)] = ((cf[:len(idx)] - cf[len(idx):]) / (2 * step)).numpy()
    return grad.reshape(h, w)


def relative_l2(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-30))
