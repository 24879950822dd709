"""Unstacked DeepONet baseline: branch(f) . trunk(x) + bias."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import torch
from torch import nn

from .core import DTYPE, MLP
from .errors import ConfigurationError, DimensionError
from .model import FieldOperator


@dataclass
class DeepONetConfig:
    dim: int = 1
    canonical_resolution: int = 256
    branch_widths: tuple = (128, 128, 128)
    trunk_widths: tuple = (128, 128, 128)
    input_scale: float = 1.0
    output_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.branch_widths = tuple(self.branch_widths)
        self.trunk_widths = tuple(self.trunk_widths)
        if self.branch_widths[-1] != self.trunk_widths[-1]:
            raise ConfigurationError(
                f"branch and trunk must end in the same latent width, got "
                f"{self.branch_widths[-1]} and {self.trunk_widths[-1]}")

    @property
    def p(self) -> int:
        return self.branch_widths[-1]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DeepONetConfig":
        return cls(**data)


class DeepONet(FieldOperator):
    kind = "deeponet"

    def __init__(self, config: DeepONetConfig):
        super().__init__()
        self.config = config
        gen = torch.Generator().manual_seed(config.seed)
        n_in = config.canonical_resolution ** config.dim
        self.branch = MLP((n_in,) + config.branch_widths, gen)
        self.trunk = MLP((config.dim,) + config.trunk_widths, gen)
        self.bias = nn.Parameter(torch.zeros((), dtype=DTYPE))

    def forward_batch(self, inputs: torch.Tensor, points: torch.Tensor, ctx=None) -> torch.Tensor:
        flat = inputs.reshape(inputs.shape[0], -1)
        if flat.shape[1] != self.branch.layers[0].weight.shape[1]:
            raise DimensionError(f"branch expects {self.branch.layers[0].weight.shape[1]} "
                                 f"values per field, got {flat.shape[1]}")
        b = self.branch(flat)
        t = self.trunk(points.reshape(-1, self.config.dim))
        return self.config.output_scale * (b @ t.T + self.bias)
