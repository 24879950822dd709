"""The function-valued RKHS operator network.

For an input field f and query point x the network evaluates

    v(x) = sum_i K1(f, f_i) * sum_y w_y K2(x, y) (x) A_i(y)
    u(x) = W v(x) + b

with K1(f, g) = phi(f) * phi(g) for a shared CNN encoder phi, K2 a dense
network on the concatenated pair (x, y), A_i Chebyshev expansions, and
(x) the a-major Kronecker product.  The quadrature nodes y and weights
w_y come from a Gauss-Chebyshev rule on the unit interval/square.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .chebyshev import ChebyshevBank
from .core import DTYPE, MLP, as_tensor, conv1d_forward, conv2d_forward, glorot_uniform_
from .errors import ConfigurationError, DimensionError, UsageError
from .grid import GridFunction, resample_values
from .quadrature import unit_rule

# query points evaluated per chunk at inference; bounds K2 activation memory
QUERY_CHUNK = 1024


def hadamard(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"hadamard: lengths {a.shape[-1]} and {b.shape[-1]} differ")
    return a * b


def kron_vec(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """[a1 b1, a1 b2, ..., a2 b1, ...]: flattened outer product, a-major."""
    return (a[..., :, None] * b[..., None, :]).reshape(a.shape[:-1] + (-1,))


@dataclass
class ModelConfig:
    dim: int = 1
    canonical_resolution: int = 256
    n_anchors: int = 128
    d_k: int = 32
    d_a: int = 1
    m: int = 10
    quad_n: int = 10
    quad_weights: str = "corrected"
    a_eval: str = "node"
    k1_form: str = "product"
    lift_channels: int = 32
    kernel_size: int = 32
    pool: str = "cells"
    pool_cells: int = 32
    k1_widths: tuple = (128, 256, 256, 128)
    k2_widths: tuple = (128, 128, 128, 128)
    input_scale: float = 1.0
    output_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.k1_widths = tuple(self.k1_widths)
        self.k2_widths = tuple(self.k2_widths)
        if self.dim not in (1, 2):
            raise ConfigurationError(f"dim must be 1 or 2, got {self.dim}")
        if self.a_eval not in ("node", "query"):
            raise ConfigurationError(f"a_eval must be 'node' or 'query', got {self.a_eval!r}")
        if self.k1_form not in ("product", "stacked"):
            raise ConfigurationError(f"k1_form must be 'product' or 'stacked', got {self.k1_form!r}")
        if self.pool not in ("cells", "global"):
            raise ConfigurationError(f"pool must be 'cells' or 'global', got {self.pool!r}")
        if min(self.n_anchors, self.d_k, self.d_a, self.m, self.quad_n, self.pool_cells) < 1:
            raise ConfigurationError(
                "n_anchors, d_k, d_a, m, quad_n and pool_cells must all be positive")

    @property
    def d(self) -> int:
        return self.d_k * self.d_a

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)


class FieldOperator(nn.Module):
    """Shared input handling for networks mapping a sampled field to point values."""

    kind = "base"
    config: ModelConfig

    def prepare_inputs(self, values) -> torch.Tensor:
        """Resample raw field samples to the canonical grid and normalize."""
        values = np.asarray(values, dtype=np.float64)
        dim = self.config.dim
        if values.ndim == dim:
            values = values[None]
        if values.ndim != dim + 1:
            raise DimensionError(f"expected {dim}D fields, got array of shape {values.shape}")
        if dim == 2 and values.shape[-1] != values.shape[-2]:
            raise DimensionError(f"2D fields must be square, got {values.shape[-2:]}")
        canon = resample_values(values, self.config.canonical_resolution, dim)
        return as_tensor(canon) / self.config.input_scale

    def forward_batch(self, inputs: torch.Tensor, points: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def predict_batch(self, values, points) -> np.ndarray:
        """Predictions (n_fields, n_points) for raw field samples at any resolution."""
        inputs = self.prepare_inputs(values)
        pts = as_tensor(np.asarray(points, dtype=np.float64).reshape(-1, self.config.dim))
        with torch.no_grad():
            ctx = self.inference_context(inputs)
            chunks = [self.forward_batch(inputs, pts[i:i + QUERY_CHUNK], ctx)
                      for i in range(0, len(pts), QUERY_CHUNK)]
        return torch.cat(chunks, dim=1).numpy()

    def inference_context(self, inputs: torch.Tensor):
        return None

    def predict_field(self, f: GridFunction, x_points) -> np.ndarray:
        return self.predict_batch(f.values, x_points)[0]

    def forward(self, f: GridFunction, x) -> float:
        return float(self.predict_field(f, np.asarray([x], dtype=np.float64))[0])

    def count_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())


class EncoderK1(nn.Module):
    """Channel lift (no activation), average pooling, then a ReLU dense stack.

    ``pool="global"`` averages each channel over all positions, which leaves
    the dense stack a linear, nearly shift-invariant summary of the field.
    ``pool="cells"`` averages over a fixed grid of ``pool_cells`` cells per
    axis and flattens, so the encoder still sees where features sit.  Both
    produce the same feature length at any canonical resolution.
    """

    def __init__(self, config: ModelConfig, in_channels: int, generator: torch.Generator):
        super().__init__()
        self.dim = config.dim
        ks = min(config.kernel_size, config.canonical_resolution)
        self.kernel_size = ks
        c = config.lift_channels
        shape = (c, in_channels) + (ks,) * config.dim
        self.lift_weight = nn.Parameter(glorot_uniform_(
            torch.empty(shape, dtype=DTYPE), in_channels * ks ** config.dim,
            c * ks ** config.dim, generator))
        self.lift_bias = nn.Parameter(torch.zeros(c, dtype=DTYPE))
        if config.pool == "global":
            self.cells = None
            n_features = c
        else:
            self.cells = min(config.pool_cells, config.canonical_resolution)
            n_features = c * self.cells ** config.dim
        self.mlp = MLP((n_features,) + config.k1_widths + (config.d,), generator)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """x: (batch, in_channels, P) or (batch, in_channels, P, P) -> (batch, d)."""
        if self.dim == 1:
            h = conv1d_forward(x, self.lift_weight, self.kernel_size, "same", self.lift_bias)
        else:
            h = conv2d_forward(x, self.lift_weight, self.lift_bias)
        if self.cells is None:
            pooled = h.flatten(2).mean(-1)
        elif self.dim == 1:
            pooled = F.adaptive_avg_pool1d(h, self.cells).flatten(1)
        else:
            pooled = F.adaptive_avg_pool2d(h, self.cells).flatten(1)
        return self.mlp(pooled)


class RKHSOperatorModel(FieldOperator):
    kind = "rkhs"

    def __init__(self, config: ModelConfig, anchors):
        super().__init__()
        anchors = np.asarray(anchors, dtype=np.float64)
        expected = (config.n_anchors,) + (config.canonical_resolution,) * config.dim
        if anchors.shape != expected:
            raise DimensionError(f"anchors have shape {anchors.shape}, expected {expected}")
        self.config = config
        gen = torch.Generator().manual_seed(config.seed)
        in_ch = 1 if config.k1_form == "product" else 2
        self.encoder = EncoderK1(config, in_ch, gen)
        self.k2 = MLP((2 * config.dim,) + config.k2_widths + (config.d_k,), gen)
        self.bank = ChebyshevBank(config.n_anchors, config.m, config.d_a, config.dim, generator=gen)
        self.W = nn.Parameter(glorot_uniform_(torch.empty(config.d, dtype=DTYPE), config.d, 1, gen))
        self.b = nn.Parameter(torch.zeros((), dtype=DTYPE))
        rule = unit_rule(config.quad_n, config.dim, config.quad_weights)
        nodes = rule.nodes.reshape(-1, config.dim)
        self.register_buffer("anchors", as_tensor(anchors))
        self.register_buffer("quad_nodes", as_tensor(nodes))
        self.register_buffer("quad_weights", as_tensor(rule.weights))
        self.register_buffer("node_basis", self.bank.basis(rule.nodes))

    # -- building blocks -------------------------------------------------

    def encode(self, inputs: torch.Tensor) -> torch.Tensor:
        """phi of normalized canonical fields (batch, P[, P]) -> (batch, d)."""
        return self.encoder(inputs.unsqueeze(1))

    def anchor_inputs(self) -> torch.Tensor:
        return self.anchors / self.config.input_scale

    def k1_pairs(self, inputs: torch.Tensor) -> torch.Tensor:
        """Stacked-form kernel for every (input, anchor) pair: (batch, n_anchors, d)."""
        anchors = self.anchor_inputs()
        b, n = inputs.shape[0], anchors.shape[0]
        x = inputs.unsqueeze(1).expand((b, n) + inputs.shape[1:])
        a = anchors.unsqueeze(0).expand((b, n) + anchors.shape[1:])
        pair = torch.stack([x, a], dim=2).reshape((b * n, 2) + inputs.shape[1:])
        return self.encoder(pair).reshape(b, n, -1)

    def k1_kernel(self, f: GridFunction, g: GridFunction) -> torch.Tensor:
        p = self.config.canonical_resolution
        if f.resolution != p or g.resolution != p or f.dim != self.config.dim or g.dim != self.config.dim:
            raise UsageError(f"k1_kernel needs both fields at the canonical resolution {p}")
        x = as_tensor(np.stack([f.values, g.values])) / self.config.input_scale
        if self.config.k1_form == "product":
            phi = self.encode(x)
            return hadamard(phi[0], phi[1])
        return self.encoder(x.unsqueeze(0))[0]

    def k2_at(self, points: torch.Tensor) -> torch.Tensor:
        """K2 at every (query, node) pair: (n_points, n_nodes, d_k)."""
        nq, dim = self.quad_nodes.shape
        xs = points.reshape(-1, 1, dim).expand(-1, nq, dim)
        ys = self.quad_nodes.unsqueeze(0).expand(xs.shape[0], nq, dim)
        return self.k2(torch.cat([xs, ys], dim=-1))

    def integral_term(self, x, i: int) -> torch.Tensor:
        """sum_y w_y K2(x, y) (x) A_i(y)  (or A_i(x) in query mode), in R^d."""
        if not 0 <= i < self.config.n_anchors:
            raise UsageError(f"anchor index {i} out of range")
        pt = as_tensor(np.asarray(x, dtype=np.float64).reshape(1, self.config.dim))
        k = self.k2_at(pt)[0]
        w = self.quad_weights
        if self.config.a_eval == "node":
            a = self.bank.eval_at(None, self.node_basis)[i]
            return kron_vec(k * w[:, None], a).sum(0)
        a = self.bank.eval_at(self._bank_points(pt))[i, 0]
        return kron_vec((w[:, None] * k).sum(0), a)

    def _bank_points(self, points: torch.Tensor) -> np.ndarray:
        """Query points in the layout the bank expects: (P,) in 1D, (P, 2) in 2D."""
        pts = points.detach().numpy().reshape(-1, self.config.dim)
        return pts[:, 0] if self.config.dim == 1 else pts

    # -- batched evaluation ----------------------------------------------

    def inference_context(self, inputs: torch.Tensor):
        if self.config.k1_form == "product":
            return self.encode(self.anchor_inputs())
        return None

    def forward_batch(self, inputs: torch.Tensor, points: torch.Tensor,
                      anchor_codes: torch.Tensor | None = None) -> torch.Tensor:
        """Predictions (batch, n_points) for normalized canonical inputs.

        The anchor sum is contracted before the batch dimension is
        introduced, which is algebraically identical to summing the
        per-anchor terms.
        """
        cfg = self.config
        k = self.k2_at(points)  # (P, Q, d_k)
        w = self.quad_weights
        if cfg.a_eval == "node":
            a = self.bank.eval_at(None, self.node_basis)  # (A, Q, e)
        else:
            a = self.bank.eval_at(self._bank_points(points))  # (A, P, e)
        wd = self.W.reshape(cfg.d_k, cfg.d_a)
        if cfg.k1_form == "product":
            if anchor_codes is None:
                anchor_codes = self.encode(self.anchor_inputs())
            pa = anchor_codes.reshape(-1, cfg.d_k, cfg.d_a)
            pf = self.encode(inputs).reshape(-1, cfg.d_k, cfg.d_a)
            if cfg.a_eval == "node":
                m = torch.einsum("aqe,ace->qce", a, pa) * w[:, None, None]
                c = torch.einsum("pqc,qce->pce", k, m)
            else:
                kbar = torch.einsum("q,pqc->pc", w, k)
                c = kbar[:, :, None] * torch.einsum("ape,ace->pce", a, pa)
            v = torch.einsum("bce,pce->bp", pf * wd, c)
        else:
            k1 = self.k1_pairs(inputs).reshape(inputs.shape[0], -1, cfg.d_k, cfg.d_a)
            if cfg.a_eval == "node":
                integ = torch.einsum("q,pqc,aqe->pace", w, k, a)
            else:
                integ = torch.einsum("q,pqc,ape->pace", w, k, a)
            v = torch.einsum("bace,pace->bp", k1 * wd, integ)
        return cfg.output_scale * (v + self.b)


def build_rkhs(config: ModelConfig, anchors) -> RKHSOperatorModel:
    return RKHSOperatorModel(config, anchors)
