"""Dense-array layer primitives, gradients, Adam and the cyclic LR schedule.

Arrays are float64 ``torch.Tensor`` objects and reverse-mode gradients come
from torch autograd; this module pins the layer conventions (padding,
initialization, activation) and the optimizer arithmetic on top of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import torch
from torch import nn
import torch.nn.functional as F

from .errors import ConfigurationError, DimensionError, NumericalError, UsageError

DTYPE = torch.float64


def as_tensor(x) -> torch.Tensor:
    return torch.as_tensor(x, dtype=DTYPE)


def glorot_uniform_(t: torch.Tensor, fan_in: int, fan_out: int,
                    generator: torch.Generator | None = None) -> torch.Tensor:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    with torch.no_grad():
        t.uniform_(-bound, bound, generator=generator)
    return t


def _activate(x: torch.Tensor, activation: str) -> torch.Tensor:
    if activation == "relu":
        return torch.relu(x)
    if activation == "identity":
        return x
    raise ConfigurationError(f"unknown activation {activation!r}")


def dense_forward(input: torch.Tensor, weights: torch.Tensor, bias: torch.Tensor,
                  activation: str = "identity") -> torch.Tensor:
    """Affine map ``input @ weights.T + bias`` followed by ``activation``.

    ``weights`` has shape (out, in); ``input`` may carry any number of
    leading batch dimensions.
    """
    if weights.ndim != 2 or input.shape[-1] != weights.shape[1]:
        raise DimensionError(
            f"dense: input {tuple(input.shape)} incompatible with weights {tuple(weights.shape)}")
    if bias.shape != (weights.shape[0],):
        raise DimensionError(
            f"dense: bias {tuple(bias.shape)} does not match weights {tuple(weights.shape)}")
    return _activate(F.linear(input, weights, bias), activation)


def same_padding(kernel_size: int) -> tuple[int, int]:
    left = (kernel_size - 1) // 2
    return left, kernel_size - 1 - left


def conv1d_forward(input: torch.Tensor, kernels: torch.Tensor, kernel_size: int,
                   padding: str = "same", bias: torch.Tensor | None = None) -> torch.Tensor:
    """Cross-correlation of (batch?, channels, length) input with zero fill.

    ``kernels`` has shape (out_channels, in_channels, kernel_size).  With
    ``padding="same"`` the output length equals the input length; even
    kernel sizes put the extra zero on the right.
    """
    if kernels.ndim != 3 or kernels.shape[-1] != kernel_size:
        raise DimensionError(f"conv1d: kernels {tuple(kernels.shape)} vs kernel_size {kernel_size}")
    squeeze = input.ndim == 2
    x = input.unsqueeze(0) if squeeze else input
    if x.ndim != 3 or x.shape[1] != kernels.shape[1]:
        raise DimensionError(
            f"conv1d: input {tuple(input.shape)} incompatible with kernels {tuple(kernels.shape)}")
    if padding == "same":
        x = F.pad(x, same_padding(kernel_size))
    elif padding != "valid":
        raise ConfigurationError(f"conv1d: unknown padding {padding!r}")
    if kernel_size > x.shape[-1]:
        raise ConfigurationError(
            f"conv1d: kernel size {kernel_size} exceeds padded length {x.shape[-1]}")
    out = F.conv1d(x, kernels, bias)
    return out.squeeze(0) if squeeze else out


def conv2d_forward(input: torch.Tensor, kernels: torch.Tensor,
                   bias: torch.Tensor | None = None) -> torch.Tensor:
    """'Same'-padded 2D cross-correlation evaluated with FFTs.

    input: (batch, in_channels, H, W); kernels: (out, in_channels, kh, kw).
    Large kernels (32x32 on a 64x64 grid) are what this is for; the result
    equals the direct zero-padded correlation up to rounding.
    """
    if input.ndim != 4 or kernels.ndim != 4 or input.shape[1] != kernels.shape[1]:
        raise DimensionError(
            f"conv2d: input {tuple(input.shape)} incompatible with kernels {tuple(kernels.shape)}")
    _, _, h, w = input.shape
    kh, kw = kernels.shape[-2:]
    if kh > h or kw > w:
        raise ConfigurationError(f"conv2d: kernel {kh}x{kw} larger than grid {h}x{w}")
    (t, b), (l, r) = same_padding(kh), same_padding(kw)
    x = F.pad(input, (l, r, t, b))
    size = (h + kh - 1, w + kw - 1)
    xf = torch.fft.rfft2(x, s=size)
    kf = torch.fft.rfft2(kernels, s=size)
    # sum over input channels: (B,1,C,...) * conj(1,O,C,...)
    prod = (xf.unsqueeze(1) * kf.conj().unsqueeze(0)).sum(2)
    out = torch.fft.irfft2(prod, s=size)[..., :h, :w]
    if bias is not None:
        out = out + bias[:, None, None]
    return out


class Dense(nn.Module):
    def __init__(self, n_in: int, n_out: int, activation: str = "identity",
                 generator: torch.Generator | None = None):
        super().__init__()
        self.activation = activation
        self.weight = nn.Parameter(glorot_uniform_(torch.empty(n_out, n_in, dtype=DTYPE),
                                                   n_in, n_out, generator))
        self.bias = nn.Parameter(torch.zeros(n_out, dtype=DTYPE))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return dense_forward(x, self.weight, self.bias, self.activation)


class MLP(nn.Module):
    """ReLU dense stack; the final layer is linear."""

    def __init__(self, widths: Sequence[int], generator: torch.Generator | None = None):
        super().__init__()
        if len(widths) < 2:
            raise ConfigurationError(f"MLP needs at least input and output widths, got {widths}")
        n = len(widths) - 1
        self.layers = nn.ModuleList(
            Dense(a, b, "relu" if i < n - 1 else "identity", generator)
            for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for layer in self.layers:
            x = layer(x)
        return x


def backward(loss: torch.Tensor, params: Mapping[str, torch.Tensor]) -> dict[str, torch.Tensor]:
    """Gradients of a scalar ``loss`` for every named parameter.

    Parameters the loss does not depend on get a zero gradient.
    """
    if loss.numel() != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {tuple(loss.shape)}")
    names = list(params)
    grads = torch.autograd.grad(loss.reshape(()), [params[n] for n in names], allow_unused=True)
    return {n: torch.zeros_like(params[n]) if g is None else g for n, g in zip(names, grads)}


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict[str, torch.Tensor] = field(default_factory=dict)
    v: dict[str, torch.Tensor] = field(default_factory=dict)


def adam_step(params: Mapping[str, torch.Tensor], grads: Mapping[str, torch.Tensor],
              state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if lr <= 0:
        raise ConfigurationError(f"learning rate must be positive, got {lr}")
    for name, g in grads.items():
        if not torch.isfinite(g).all():
            raise NumericalError(f"non-finite gradient for parameter {name!r}")
        if g.shape != params[name].shape:
            raise DimensionError(f"gradient for {name!r} has shape {tuple(g.shape)}, "
                                 f"parameter has {tuple(params[name].shape)}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    with torch.no_grad():
        for name, g in grads.items():
            m = state.m.get(name)
            if m is None:
                m = state.m[name] = torch.zeros_like(g)
                state.v[name] = torch.zeros_like(g)
            v = state.v[name]
            m.mul_(state.beta1).add_(g, alpha=1.0 - state.beta1)
            v.mul_(state.beta2).addcmul_(g, g, value=1.0 - state.beta2)
            denom = (v / c2).sqrt_().add_(state.epsilon)
            params[name].addcdiv_(m, denom, value=-lr / c1)


@dataclass(frozen=True)
class LrSchedule:
    """Polynomial decay from ``lr_init`` to ``lr_final`` restarted every cycle."""

    lr_init: float = 2e-4
    lr_final: float = 2e-8
    cycle_length: int = 200
    power: float = 0.5

    def __post_init__(self):
        if not self.lr_init > self.lr_final > 0:
            raise ConfigurationError(
                f"need lr_init > lr_final > 0, got {self.lr_init}, {self.lr_final}")
        if self.cycle_length < 1:
            raise ConfigurationError(f"cycle_length must be positive, got {self.cycle_length}")


def lr_at(epoch: int, schedule: LrSchedule = LrSchedule()) -> float:
    e = epoch % schedule.cycle_length
    frac = 1.0 - e / schedule.cycle_length
    return (schedule.lr_init - schedule.lr_final) * frac ** schedule.power + schedule.lr_final
