"""Fields sampled on uniform grids over the unit interval or square.

1D grids are periodic: s points at x_j = j/s, so x=1 is the first sample
again.  2D grids are closed: s points per axis from 0 to 1 inclusive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigurationError, DimensionError


@dataclass
class GridFunction:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim not in (1, 2):
            raise DimensionError(f"grid function must be 1D or 2D, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function has non-finite entries")

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    def points(self) -> np.ndarray:
        return grid_points(self.resolution, self.dim)


def grid_points(resolution: int, dim: int = 1) -> np.ndarray:
    """Sample locations: (s,) periodic in 1D, (s*s, 2) closed in 2D."""
    if dim == 1:
        return np.arange(resolution) / resolution
    axis = np.linspace(0.0, 1.0, resolution)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def downsample_values(values: np.ndarray, target: int, dim: int = 1) -> np.ndarray:
    """Stride subsampling along the trailing ``dim`` axes, keeping the first point."""
    src = values.shape[-1]
    if dim == 1:
        if target < 1 or src % target:
            raise ConfigurationError(f"target resolution {target} does not divide {src}")
        return values[..., :: src // target].copy()
    if target < 2 or (src - 1) % (target - 1):
        raise ConfigurationError(f"closed grid {src} cannot be strided to {target}")
    step = (src - 1) // (target - 1)
    return values[..., ::step, ::step].copy()


def downsample(u: GridFunction, target_resolution: int) -> GridFunction:
    return GridFunction(downsample_values(u.values, target_resolution, u.dim))


def resample_values(values: np.ndarray, target: int, dim: int = 1) -> np.ndarray:
    """Trigonometric (1D, periodic) or bilinear (2D) resampling of the trailing axes."""
    src = values.shape[-1]
    if src == target:
        return values.copy()
    if dim == 1:
        return signal.resample(values, target, axis=-1)
    old = np.linspace(0.0, 1.0, src)
    new = grid_points(target, 2)
    flat = values.reshape((-1, src, src))
    out = np.empty((flat.shape[0], target * target))
    for n, v in enumerate(flat):
        out[n] = RegularGridInterpolator((old, old), v, method="linear")(new)
    return out.reshape(values.shape[:-2] + (target, target))


def resample_to_canonical(f: GridFunction, resolution: int) -> GridFunction:
    return GridFunction(resample_values(f.values, resolution, f.dim))
