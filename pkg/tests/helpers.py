"""Shared test utilities: finite-difference gradient checks and tiny models."""

from __future__ import annotations

import numpy as np
import torch

from fvrkhs.core import backward
from fvrkhs.model import ModelConfig, RKHSOperatorModel


def fd_gradient_check(loss_fn, params: dict, n_probe: int = 6, seed: int = 0) -> float:
    """Worst relative error between autograd and central differences.

    Up to ``n_probe`` entries of every parameter are probed with step
    1e-5 * (1 + |theta|).  The error is measured per parameter over the
    probed entries as ||fd - ad|| / max(||fd||, ||ad||).
    """
    grads = backward(loss_fn(), params)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, p in params.items():
        flat = p.data.view(-1)
        idx = rng.choice(flat.numel(), size=min(n_probe, flat.numel()), replace=False)
        fd, ad = [], []
        for j in idx:
            theta = flat[j].item()
            h = 1e-5 * (1.0 + abs(theta))
            with torch.no_grad():
                flat[j] = theta + h
                up = loss_fn().item()
                flat[j] = theta - h
                down = loss_fn().item()
                flat[j] = theta
            fd.append((up - down) / (2 * h))
            ad.append(grads[name].reshape(-1)[j].item())
        fd, ad = np.array(fd), np.array(ad)
        scale = max(np.linalg.norm(fd), np.linalg.norm(ad))
        if scale > 1e-9:
            worst = max(worst, float(np.linalg.norm(fd - ad) / scale))
    return worst


def tiny_config(**kw) -> ModelConfig:
    base = dict(dim=1, canonical_resolution=8, n_anchors=2, d_k=3, d_a=1, m=2, quad_n=2,
                lift_channels=2, kernel_size=3, pool_cells=4, k1_widths=(4,), k2_widths=(4,),
                seed=3)
    base.update(kw)
    return ModelConfig(**base)


def tiny_model(**kw) -> RKHSOperatorModel:
    cfg = tiny_config(**kw)
    rng = np.random.default_rng(cfg.seed)
    shape = (cfg.n_anchors,) + (cfg.canonical_resolution,) * cfg.dim
    return RKHSOperatorModel(cfg, rng.standard_normal(shape))


def bandlimited(x: np.ndarray, n_modes: int = 5, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(n_modes), rng.standard_normal(n_modes)
    k = np.arange(1, n_modes + 1)
    return (a[:, None] * np.cos(2 * np.pi * k[:, None] * x) +
            b[:, None] * np.sin(2 * np.pi * k[:, None] * x)).sum(0)
