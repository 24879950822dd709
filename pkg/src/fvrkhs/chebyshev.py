"""Learnable functions expanded in a truncated Chebyshev basis."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .core import DTYPE, as_tensor
from .errors import DomainError, UsageError

_EDGE_TOL = 1e-12


def _to_reference(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if np.any(x < lo - _EDGE_TOL) or np.any(x > hi + _EDGE_TOL):
        raise DomainError(f"point outside [{lo}, {hi}]")
    return np.clip(2.0 * (x - lo) / (hi - lo) - 1.0, -1.0, 1.0)


def _cheb_1d(t: np.ndarray, m: int) -> np.ndarray:
    out = np.empty(t.shape + (m,))
    out[..., 0] = 1.0
    if m > 1:
        out[..., 1] = t
    for j in range(2, m):
        out[..., j] = 2.0 * t * out[..., j - 1] - out[..., j - 2]
    return out


def cheb_basis(x, m: int, bounds=((0.0, 1.0),)) -> np.ndarray:
    """T_0..T_{m-1} at ``x`` mapped affinely from ``bounds`` onto [-1, 1].

    In 1D ``x`` is a scalar or array and the result has a trailing axis of
    length m.  In 2D ``x`` has a trailing axis of length 2 and the result
    is the flattened tensor-product basis of length m*m (first coordinate
    major).
    """
    x = np.asarray(x, dtype=np.float64)
    if len(bounds) == 1:
        return _cheb_1d(_to_reference(x, *bounds[0]), m)
    if x.shape[-1] != 2:
        raise DomainError(f"2D basis needs points with 2 coordinates, got shape {x.shape}")
    tx = _cheb_1d(_to_reference(x[..., 0], *bounds[0]), m)
    ty = _cheb_1d(_to_reference(x[..., 1], *bounds[1]), m)
    return (tx[..., :, None] * ty[..., None, :]).reshape(x.shape[:-1] + (m * m,))


class ChebyshevBank(nn.Module):
    """``n_anchors`` vector functions A_i: domain -> R^{d_a}.

    coeffs has shape (n_anchors, d_a, m) on an interval and
    (n_anchors, d_a, m, m) on a rectangle.
    """

    def __init__(self, n_anchors: int, m: int = 10, d_a: int = 1, dim: int = 1,
                 bounds=None, generator: torch.Generator | None = None, init_scale: float = 0.1):
        super().__init__()
        self.n_anchors, self.m, self.d_a, self.dim = n_anchors, m, d_a, dim
        self.bounds = tuple(bounds) if bounds is not None else ((0.0, 1.0),) * dim
        shape = (n_anchors, d_a) + (m,) * dim
        coeffs = torch.empty(shape, dtype=DTYPE)
        with torch.no_grad():
            coeffs.uniform_(-init_scale, init_scale, generator=generator)
        self.coeffs = nn.Parameter(coeffs)

    def basis(self, points) -> torch.Tensor:
        return as_tensor(cheb_basis(points, self.m, self.bounds))

    def eval_at(self, points, basis: torch.Tensor | None = None) -> torch.Tensor:
        """All functions at all points: (n_anchors, n_points, d_a)."""
        if basis is None:
            basis = self.basis(points)
        flat = self.coeffs.reshape(self.n_anchors, self.d_a, -1)
        return torch.einsum("aem,pm->ape", flat, basis)

    def bank_eval(self, i: int, y) -> torch.Tensor:
        if not 0 <= i < self.n_anchors:
            raise UsageError(f"anchor index {i} out of range [0, {self.n_anchors})")
        b = self.basis(y)
        return self.coeffs[i].reshape(self.d_a, -1) @ b
