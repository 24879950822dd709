import numpy as np
import pytest

from fvrkhs.data import grf_spec
from fvrkhs.errors import ConfigurationError, DomainError, NumericalError
from fvrkhs.grf import sample_many
from fvrkhs.grid import GridFunction
from fvrkhs.solvers import (SolverConfig, advection_batch, burgers_batch, default_config, kdv_batch,
                            kdv_soliton, poisson_amplitude, poisson_pair, poisson_solution_grid,
                            poisson_source_grid, solve_advection, solve_burgers, solve_kdv)


def grid(n):
    return np.arange(n) / n


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


# -- advection ---------------------------------------------------------

def test_advection_full_period_is_identity():
    u0 = sample_many(grf_spec("advection", 256, 3), 4)
    assert np.array_equal(advection_batch(u0, 1.0), u0)


def test_advection_half_period_flips_sine():
    x = grid(128)
    out = solve_advection(GridFunction(np.sin(2 * np.pi * x)), t_final=0.5).values
    np.testing.assert_allclose(out, -np.sin(2 * np.pi * x), atol=1e-15)


def test_advection_preserves_l2_norm():
    u0 = sample_many(grf_spec("advection", 256, 0), 3)
    out = advection_batch(u0, 0.3137)
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), np.linalg.norm(u0, axis=1), rtol=1e-13)


def test_advection_non_grid_shift_matches_analytic_transport():
    x = grid(64)
    out = advection_batch(np.cos(2 * np.pi * 3 * x), 0.123)
    np.testing.assert_allclose(out, np.cos(2 * np.pi * 3 * (x - 0.123)), atol=1e-13)


# -- Burgers -------------------------------------------------------------

def burgers_cfg(n=256, dt=1e-4, t=1.0):
    return SolverConfig(pde="burgers", resolution=n, dt=dt, t_final=t)


def test_burgers_zero_stays_zero():
    assert np.all(solve_burgers(GridFunction(np.zeros(64)), burgers_cfg(64, t=0.1)).values == 0)


def test_burgers_constant_is_steady():
    out = solve_burgers(GridFunction(np.full(64, 0.3)), burgers_cfg(64, t=0.1)).values
    np.testing.assert_allclose(out, 0.3, rtol=0, atol=1e-14)


def test_burgers_mean_conserved_and_energy_decreasing():
    u = sample_many(grf_spec("burgers", 256, 11), 3) * 50.0  # stronger nonlinearity than the dataset
    mean0 = u.mean(axis=1)
    energies = [np.sum(u ** 2, axis=1)]
    for _ in range(10):
        u = burgers_batch(u, burgers_cfg(t=0.1))
        energies.append(np.sum(u ** 2, axis=1))
    assert np.max(np.abs(u.mean(axis=1) - mean0)) <= 1e-10
    assert np.all(np.diff(np.array(energies), axis=0) <= 0)


def test_burgers_step_halving():
    u0 = sample_many(grf_spec("burgers", 256, 5), 2)
    a = burgers_batch(u0, burgers_cfg(dt=1e-4))
    b = burgers_batch(u0, burgers_cfg(dt=5e-5))
    assert rel(a, b) <= 1e-6


def test_burgers_cfl_guard():
    with pytest.raises(NumericalError, match="CFL"):
        burgers_batch(np.full((1, 64), 1e3), burgers_cfg(64, dt=1e-2, t=0.02))


def test_burgers_nan_guard():
    u0 = np.zeros((1, 64))
    u0[0, 3] = np.nan
    with pytest.raises(NumericalError):
        burgers_batch(u0, burgers_cfg(64, t=0.1))


# -- KdV -------------------------------------------------------------------

def kdv_cfg(n, dt, t=1.0):
    return SolverConfig(pde="kdv", resolution=n, dt=dt, t_final=t)


def test_kdv_zero_stays_zero():
    assert np.all(solve_kdv(GridFunction(np.zeros(64)), kdv_cfg(64, 1e-4, 0.01)).values == 0)


@pytest.fixture(scope="module")
def kdv_runs():
    # dt=1e-5 is twice the full-mode default; the halved run sits at 5e-6
    u0 = sample_many(grf_spec("kdv", 128, 21), 2)
    return u0, kdv_batch(u0, kdv_cfg(128, 1e-5)), kdv_batch(u0, kdv_cfg(128, 5e-6))


def test_kdv_mass_and_momentum_conserved(kdv_runs):
    u0, u1, _ = kdv_runs
    mass0, mass1 = u0.mean(axis=1), u1.mean(axis=1)
    mom0, mom1 = np.mean(u0 ** 2, axis=1), np.mean(u1 ** 2, axis=1)
    assert np.max(np.abs(mass1 - mass0)) <= 1e-8
    assert np.max(np.abs(mom1 - mom0) / mom0) <= 1e-5


def test_kdv_step_halving(kdv_runs):
    _, a, b = kdv_runs
    assert rel(a, b) <= 1e-6


def test_kdv_soliton_translates_at_analytic_speed():
    n, c, t = 256, 900.0, 1e-4
    x = grid(n)
    cfg = SolverConfig(pde="kdv", resolution=n, dt=1e-7, t_final=t)
    out = solve_kdv(GridFunction(kdv_soliton(x, c)), cfg).values
    assert rel(out, kdv_soliton(x, c, t)) <= 1e-3


def test_kdv_default_fast_config_is_stable():
    u0 = sample_many(grf_spec("kdv", 512, 0), 1)
    cfg = default_config("kdv", fast=True)
    out = kdv_batch(u0, SolverConfig(pde="kdv", resolution=512, dt=cfg.dt, t_final=0.05))
    assert np.all(np.isfinite(out))


def test_t_final_must_be_multiple_of_dt():
    with pytest.raises(ConfigurationError):
        _ = kdv_cfg(64, 3e-4, 0.001).n_steps


# -- Poisson -------------------------------------------------------------

def test_poisson_boundary_values_vanish():
    s = np.linspace(0, 1, 17)
    pts = np.concatenate([np.stack([s, 0 * s], 1), np.stack([s, 0 * s + 1], 1),
                          np.stack([0 * s, s], 1), np.stack([0 * s + 1, s], 1)])
    _, u = poisson_pair(37.0, pts)
    assert np.all(u == 0)


def test_poisson_center_value():
    _, u = poisson_pair(15.0, [[0.5, 0.5]])
    assert u[0] == 0.46875


def test_poisson_negative_laplacian_equals_source():
    h = 1e-3
    rng = np.random.default_rng(0)
    pts = 0.1 + 0.8 * rng.random((20, 2))
    a = 80.0
    _, u0 = poisson_pair(a, pts)
    lap = -4 * u0
    for d in ([h, 0], [-h, 0], [0, h], [0, -h]):
        lap = lap + poisson_pair(a, pts + np.array(d))[1]
    lap /= h * h
    f, _ = poisson_pair(a, pts)
    np.testing.assert_allclose(-lap, f, rtol=0, atol=1e-6)


def test_poisson_rejects_outside_points():
    with pytest.raises(DomainError):
        poisson_pair(1.0, [[1.2, 0.5]])


def test_poisson_grids_and_amplitude_recovery():
    f = poisson_source_grid(70.0, 64)
    assert f.shape == (64, 64)
    assert poisson_amplitude(f) == pytest.approx(70.0, rel=1e-14)
    assert poisson_solution_grid(70.0, 64)[0].max() == 0.0
