"""Gauss-Chebyshev quadrature rules on intervals and rectangles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

WEIGHT_MODES = ("corrected", "raw")


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights; ``nodes`` is (n,) in 1D and (n, 2) in 2D.

    ``bounds`` holds one (lo, hi) pair per axis.
    """

    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.nodes) != len(self.weights):
            raise ConfigurationError("quadrature rule needs one weight per node")

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, fn) -> float:
        """Apply the rule to a vectorized callable of the node array."""
        if self.dim == 1:
            vals = fn(self.nodes)
        else:
            vals = fn(self.nodes[:, 0], self.nodes[:, 1])
        return float(np.dot(self.weights, vals))


def gauss_chebyshev_rule(n: int, weights: str = "corrected") -> QuadratureRule:
    """N-point Gauss-Chebyshev rule on [-1, 1].

    ``weights="raw"`` gives the classical pi/N weights, which integrate
    g(t)/sqrt(1-t^2) exactly for polynomials g of degree <= 2N-1.
    ``weights="corrected"`` multiplies them by sqrt(1-t_k^2) so that the rule
    approximates the plain integral of g(t) dt.
    """
    if n < 1:
        raise ConfigurationError(f"quadrature needs N >= 1, got {n}")
    if weights not in WEIGHT_MODES:
        raise ConfigurationError(f"weights must be one of {WEIGHT_MODES}, got {weights!r}")
    k = np.arange(1, n + 1)
    t = np.cos((2 * k - 1) * np.pi / (2 * n))
    # mirror the first half so the rule is exactly symmetric (middle node exactly 0)
    t[n - n // 2:] = -t[:n // 2][::-1]
    if n % 2:
        t[n // 2] = 0.0
    w = np.full(n, np.pi / n)
    if weights == "corrected":
        w = w * np.sqrt(1.0 - t * t)
    return QuadratureRule(1, t, w, ((-1.0, 1.0),))


def map_to_interval(rule: QuadratureRule, a: float, b: float) -> QuadratureRule:
    if rule.dim != 1:
        raise ConfigurationError("map_to_interval expects a 1D rule")
    if not a < b:
        raise ConfigurationError(f"interval needs a < b, got [{a}, {b}]")
    lo, hi = rule.bounds[0]
    if (lo, hi) == (a, b):
        return rule
    scale = (b - a) / (hi - lo)
    nodes = a + (rule.nodes - lo) * scale
    return QuadratureRule(1, nodes, rule.weights * scale, ((float(a), float(b)),))


def tensor_rule(rx: QuadratureRule, ry: QuadratureRule) -> QuadratureRule:
    """Cartesian product of two 1D rules (x index varies slowest)."""
    if rx.dim != 1 or ry.dim != 1:
        raise ConfigurationError("tensor_rule expects two 1D rules")
    gx, gy = np.meshgrid(rx.nodes, ry.nodes, indexing="ij")
    nodes = np.stack([gx.ravel(), gy.ravel()], axis=1)
    weights = np.outer(rx.weights, ry.weights).ravel()
    return QuadratureRule(2, nodes, weights, rx.bounds + ry.bounds)


def unit_rule(n: int, dim: int = 1, weights: str = "corrected") -> QuadratureRule:
    """The n-point (per axis) rule mapped onto [0,1] or [0,1]^2."""
    r = map_to_interval(gauss_chebyshev_rule(n, weights), 0.0, 1.0)
    if dim == 1:
        return r
    if dim == 2:
        return tensor_rule(r, r)
    raise ConfigurationError(f"dim must be 1 or 2, got {dim}")
