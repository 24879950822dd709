"""Operator datasets: generation, splitting and the binary file format.

File layout (all integers and floats little-endian):

    8 bytes   magic b"FVRKHS01"
    uint32    version (1), dim, n_samples, then one resolution per dim
    16 bytes  pde tag, ASCII, zero padded
    uint64    generation seed
    float64   inputs, row-major (n_samples, res[, res])
    float64   targets, same shape
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FormatError
from .grf import GrfSpec, sample_many, unit_variance_sigma2
from .grid import downsample_values
from .solvers import (SolverConfig, advection_batch, burgers_batch, default_config, kdv_batch,
                      poisson_solution_grid, poisson_source_grid)

MAGIC = b"FVRKHS01"
VERSION = 1
PDES = ("advection", "burgers", "kdv", "poisson")

# input-field covariances per family: (sigma2, tau, alpha); KdV sigma2 set for unit variance
GRF_PARAMS = {
    "advection": (625.0, 5.0, 4.0),
    "burgers": (625.0, 5.0, 4.0),
    "kdv": (None, 4.0, 4.0),
}
POISSON_AMPLITUDES = tuple(10.0 * k for k in range(1, 21))
SOLVE_CHUNK = 200


@dataclass
class OperatorDataset:
    pde: str
    inputs: np.ndarray
    targets: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        self.targets = np.ascontiguousarray(self.targets, dtype=np.float64)
        if self.inputs.shape != self.targets.shape:
            raise ConfigurationError(
                f"inputs {self.inputs.shape} and targets {self.targets.shape} differ in shape")
        if self.inputs.ndim not in (2, 3):
            raise ConfigurationError(f"expected (n, s) or (n, s, s) arrays, got {self.inputs.shape}")

    @property
    def dim(self) -> int:
        return self.inputs.ndim - 1

    @property
    def resolution(self) -> int:
        return self.inputs.shape[-1]

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    def __len__(self) -> int:
        return self.n_samples

    def subset(self, idx) -> "OperatorDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return OperatorDataset(self.pde, self.inputs[idx], self.targets[idx], self.seed)

    def at_resolution(self, resolution: int) -> "OperatorDataset":
        """Stride-downsampled copy (identity when the resolution already matches)."""
        if resolution == self.resolution:
            return self
        return OperatorDataset(self.pde, downsample_values(self.inputs, resolution, self.dim),
                               downsample_values(self.targets, resolution, self.dim), self.seed)


def grf_spec(pde: str, resolution: int, seed: int) -> GrfSpec:
    sigma2, tau, alpha = GRF_PARAMS[pde]
    if sigma2 is None:
        sigma2 = unit_variance_sigma2(tau, alpha, resolution // 2)
    return GrfSpec(sigma2=sigma2, tau=tau, alpha=alpha, resolution=resolution, seed=seed)


def _solve_chunked(fn, u0: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    return np.concatenate([fn(u0[i:i + SOLVE_CHUNK], cfg) for i in range(0, len(u0), SOLVE_CHUNK)])


def poisson_amplitudes(n: int, seed: int) -> np.ndarray:
    """n distinct source amplitudes drawn uniformly from {10, 20, ..., 200}."""
    if not 1 <= n <= len(POISSON_AMPLITUDES):
        raise ConfigurationError(f"Poisson draws 1..{len(POISSON_AMPLITUDES)} sources, got {n}")
    rng = np.random.default_rng(seed)
    return rng.choice(np.asarray(POISSON_AMPLITUDES), size=n, replace=False)


def poisson_dataset(a_values, resolution: int = 64, seed: int = 0) -> OperatorDataset:
    a_values = np.atleast_1d(np.asarray(a_values, dtype=np.float64))
    inputs = np.stack([poisson_source_grid(a, resolution) for a in a_values])
    targets = np.stack([poisson_solution_grid(a, resolution) for a in a_values])
    return OperatorDataset("poisson", inputs, targets, seed)


def generate_dataset(pde: str, n: int, seed: int = 0, resolution: int | None = None,
                     fast: bool = False, dt: float | None = None) -> OperatorDataset:
    """Sample n input fields and solve for their targets.

    Sample i of a 1D family uses GRF seed ``seed + i``.  For Poisson, n
    source amplitudes are drawn from {10k} and ``resolution`` is the grid.
    """
    if pde not in PDES:
        raise ConfigurationError(f"unknown pde {pde!r}; expected one of {PDES}")
    cfg = default_config(pde, fast)
    res = resolution or cfg.resolution
    if pde == "poisson":
        return poisson_dataset(poisson_amplitudes(n, seed), res, seed)
    u0 = sample_many(grf_spec(pde, res, seed), n)
    if pde == "advection":
        return OperatorDataset(pde, u0, advection_batch(u0, 1.0), seed)
    cfg = SolverConfig(pde=pde, resolution=res, dt=dt or cfg.dt)
    fn = burgers_batch if pde == "burgers" else kdv_batch
    return OperatorDataset(pde, u0, _solve_chunked(fn, u0, cfg), seed)


def split_dataset(ds: OperatorDataset, n_train: int, n_test: int,
                  seed: int = 0) -> tuple[OperatorDataset, OperatorDataset]:
    """Disjoint seeded split; the train part is a permutation when n_test = 0."""
    if n_train < 0 or n_test < 0 or n_train + n_test > ds.n_samples:
        raise ConfigurationError(
            f"cannot split {ds.n_samples} samples into {n_train} train + {n_test} test")
    perm = np.random.default_rng(seed).permutation(ds.n_samples)
    return ds.subset(perm[:n_train]), ds.subset(perm[n_train:n_train + n_test])


def save_dataset(ds: OperatorDataset, path) -> None:
    tag = ds.pde.encode("ascii")
    if len(tag) > 16:
        raise ConfigurationError(f"pde tag {ds.pde!r} longer than 16 bytes")
    header = MAGIC + struct.pack(f"<{3 + ds.dim}I", VERSION, ds.dim, ds.n_samples,
                                 *ds.inputs.shape[1:])
    header += tag.ljust(16, b"\0") + struct.pack("<Q", ds.seed)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(ds.inputs.astype("<f8").tobytes())
        fh.write(ds.targets.astype("<f8").tobytes())


def load_dataset(path) -> OperatorDataset:
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:8] != MAGIC:
        raise FormatError(f"{path}: bad magic, expected {MAGIC!r}, found {raw[:8]!r}")
    pos = 8
    try:
        version, dim, n = struct.unpack_from("<3I", raw, pos)
        pos += 12
        if version != VERSION:
            raise FormatError(f"{path}: expected dataset version {VERSION}, found {version}")
        if dim not in (1, 2):
            raise FormatError(f"{path}: dim must be 1 or 2, found {dim}")
        shape = struct.unpack_from(f"<{dim}I", raw, pos)
        pos += 4 * dim
        tag = raw[pos:pos + 16].rstrip(b"\0").decode("ascii")
        pos += 16
        (seed,) = struct.unpack_from("<Q", raw, pos)
        pos += 8
    except struct.error as exc:
        raise FormatError(f"{path}: truncated header ({exc})") from None
    count = n * int(np.prod(shape))
    if len(raw) != pos + 16 * count:
        raise FormatError(f"{path}: expected {pos + 16 * count} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", count=2 * count, offset=pos).astype(np.float64)
    full = (n,) + tuple(shape)
    return OperatorDataset(tag, data[:count].reshape(full), data[count:].reshape(full), seed)
