"""Periodic Gaussian random fields on [0, 1] by spectral synthesis.

Covariance sigma2 * (-Laplacian + tau^2)^(-alpha) with eigenvalues
lambda_k = sigma2 * ((2 pi k)^2 + tau^2)^(-alpha) on the modes sqrt(2) cos(2 pi k x)
and sqrt(2) sin(2 pi k x).  The constant mode is excluded, so fields are zero-mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .grid import GridFunction


@dataclass(frozen=True)
class GrfSpec:
    sigma2: float = 625.0
    tau: float = 5.0
    alpha: float = 4.0
    resolution: int = 2048
    n_modes: int | None = None
    seed: int = 0

    def __post_init__(self):
        r = self.resolution
        if r < 2 or r & (r - 1):
            raise ConfigurationError(f"resolution must be a power of two, got {r}")
        if self.n_modes is not None and not 1 <= self.n_modes <= r // 2:
            raise ConfigurationError(f"n_modes must lie in [1, {r // 2}], got {self.n_modes}")
        if self.sigma2 < 0 or self.tau <= 0:
            raise ConfigurationError("need sigma2 >= 0 and tau > 0")

    @property
    def modes(self) -> int:
        return self.resolution // 2 if self.n_modes is None else self.n_modes


def eigenvalues(spec: GrfSpec) -> np.ndarray:
    """lambda_k for k = 1..n_modes."""
    k = np.arange(1, spec.modes + 1)
    return spec.sigma2 * ((2 * np.pi * k) ** 2 + spec.tau ** 2) ** (-spec.alpha)


def unit_variance_sigma2(tau: float, alpha: float, n_modes: int) -> float:
    """sigma2 giving pointwise variance 1 (variance is 2 * sum(lambda_k))."""
    k = np.arange(1, n_modes + 1)
    return 1.0 / (2.0 * np.sum(((2 * np.pi * k) ** 2 + tau ** 2) ** (-alpha)))


def _synthesize(spec: GrfSpec, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    n = spec.resolution
    amp = np.sqrt(2.0 * eigenvalues(spec))
    coef = np.zeros(xi.shape[:-1] + (n // 2 + 1,), dtype=np.complex128)
    # irfft(c)[j] = (1/n)(c_0 + 2 sum Re(c_k e^{2 pi i k j / n}) + c_{n/2} (-1)^j)
    coef[..., 1:spec.modes + 1] = 0.5 * n * amp * (xi - 1j * eta)
    if spec.modes == n // 2:
        coef[..., n // 2] = n * amp[-1] * xi[..., -1]
    return np.fft.irfft(coef, n=n, axis=-1)


def sample_periodic_grf(spec: GrfSpec) -> GridFunction:
    rng = np.random.default_rng(spec.seed)
    xi = rng.standard_normal(spec.modes)
    eta = rng.standard_normal(spec.modes)
    return GridFunction(_synthesize(spec, xi, eta))


def sample_many(spec: GrfSpec, n: int) -> np.ndarray:
    """n fields as an (n, resolution) array; sample i uses seed ``spec.seed + i``."""
    xi = np.empty((n, spec.modes))
    eta = np.empty((n, spec.modes))
    for i in range(n):
        rng = np.random.default_rng(spec.seed + i)
        xi[i] = rng.standard_normal(spec.modes)
        eta[i] = rng.standard_normal(spec.modes)
    return _synthesize(spec, xi, eta)
