import warnings

import numpy as np
import pytest

from phqfno.pde import (GrfSpec, SolverError, burgers_dataset, navier_stokes_dataset,
                        sample_grf, shock_datasets, solve_burgers, solve_ns_vorticity)
from phqfno.pde.grf import _hermitian_noise, eigenvalues
from phqfno.pde.navier_stokes import _Grid
from phqfno.pde.spectral import dealias_mask, refine, restrict


# --- random fields ---------------------------------------------------------------

def test_zero_mode_std():
    lam0 = eigenvalues(GrfSpec(8))[0]
    # 7^1.5 * 49^-2.5 = 7^-3.5
    assert np.sqrt(lam0) == pytest.approx(7.0 ** -1.75, rel=1e-14)
    assert np.sqrt(lam0) == pytest.approx(0.033195, abs=5e-7)


@pytest.mark.parametrize("dim", [1, 2])
def test_samples_are_real(dim):
    spec = GrfSpec(16, dim, seed=3)
    rng = np.random.default_rng(3)
    shape = (4,) + (16,) * dim
    coeff = np.sqrt(eigenvalues(spec)) * _hermitian_noise(rng, shape, dim)
    field = np.fft.ifftn(coeff, axes=tuple(range(1, dim + 1)))
    assert np.max(np.abs(field.imag)) <= 1e-12 * np.max(np.abs(field.real))
    assert sample_grf(spec, 4).shape == shape


def test_mode_variances_monte_carlo():
    spec = GrfSpec(16, 1, seed=11)
    u = sample_grf(spec, 100_000)
    coeff = np.fft.fft(u, axis=-1) / 16
    emp = np.mean(np.abs(coeff) ** 2, axis=0)
    np.testing.assert_allclose(emp, eigenvalues(spec), rtol=0.05)


def test_zero_mean_option():
    u = sample_grf(GrfSpec(8, 2, seed=1), 3, zero_mean=True)
    np.testing.assert_allclose(u.mean(axis=(1, 2)), 0, atol=1e-15)


def test_seeded_reproducibility():
    a = sample_grf(GrfSpec(32, seed=5), 3)
    b = sample_grf(GrfSpec(32, seed=5), 3)
    np.testing.assert_array_equal(a, b)


# --- spectral helpers -------------------------------------------------------------

def test_dealias_mask_two_thirds():
    m = dealias_mask(12, 1)
    k = np.abs(np.fft.fftfreq(12, 1 / 12))
    np.testing.assert_array_equal(m, k < 4)


def test_refine_restrict_round_trip(rng):
    u = sample_grf(GrfSpec(8, 2, seed=2), 2)
    np.testing.assert_allclose(restrict(refine(u, 32, 2), 8, 2), u, atol=1e-12)


# --- Burgers ---------------------------------------------------------------------

def test_burgers_zero_stays_zero():
    np.testing.assert_array_equal(solve_burgers(np.zeros((2, 64)), t_end=0.1, fine=64), 0)


def test_burgers_linear_decay():
    x = np.arange(256) / 256
    u0 = 1e-6 * np.sin(2 * np.pi * x)
    nu, t = 0.1, 0.1
    got = solve_burgers(u0, nu, t, fine=256)
    exact = np.exp(-4 * np.pi ** 2 * nu * t) * u0
    assert np.linalg.norm(got - exact) / np.linalg.norm(exact) <= 1e-3


def test_burgers_inviscid_mean_conserved():
    u0 = 0.1 + sample_grf(GrfSpec(128, seed=4), 2)
    u1 = solve_burgers(u0, nu=0.0, t_end=0.5, fine=128)
    np.testing.assert_allclose(u1.mean(axis=-1), u0.mean(axis=-1), atol=1e-8 * 0.5)


def test_burgers_energy_non_increasing():
    u0 = 20 * sample_grf(GrfSpec(128, seed=6), 1)
    snaps = solve_burgers(u0, nu=0.05, t_end=0.5, fine=128, times=np.linspace(0, 0.5, 11))
    energy = np.sum(snaps ** 2, axis=(1, 2))
    assert np.all(np.diff(energy) <= 1e-12 * energy[0])


def test_burgers_shock_refinement():
    def run(n):
        u0 = -np.sin(np.pi * (-1 + 2 * np.arange(n) / n))
        return solve_burgers(u0, 0.01 / np.pi, 1.0, fine=n, length=2.0, out=8)

    a, b = run(2048), run(4096)
    assert np.linalg.norm(a - b) / np.linalg.norm(b) <= 1e-3


def test_burgers_min_step_error():
    with pytest.raises(SolverError):
        solve_burgers(1e6 * np.ones(64) + np.sin(np.arange(64)), t_end=0.01, fine=64,
                      min_dt=1e-6)


# --- Navier-Stokes -----------------------------------------------------------------

def test_ns_zero_stays_zero():
    a, b = solve_ns_vorticity(np.zeros((16, 16)), forcing=None, t0=0.1, t1=0.2, fine=16)
    np.testing.assert_array_equal(b, 0)


def test_ns_nonlinear_term_vanishes_for_taylor_green():
    n = 32
    x = np.arange(n) / n
    gx, gy = np.meshgrid(x, x, indexing="ij")
    w = np.sin(2 * np.pi * gx) * np.sin(2 * np.pi * gy)
    adv = _Grid(n).advection(np.fft.fft2(w))
    assert np.max(np.abs(adv)) <= 1e-10 * n * n


def test_ns_taylor_green_decay():
    n, nu, t = 32, 1e-3, 1.0
    x = np.arange(n) / n
    gx, gy = np.meshgrid(x, x, indexing="ij")
    w0 = np.sin(2 * np.pi * gx) * np.sin(2 * np.pi * gy)
    _, w1 = solve_ns_vorticity(w0, nu, None, 0.0, t, fine=n)
    exact = np.exp(-8 * np.pi ** 2 * nu * t) * w0
    assert np.linalg.norm(w1 - exact) / np.linalg.norm(exact) <= 1e-3


def test_ns_inviscid_mean_conserved():
    w0 = sample_grf(GrfSpec(32, 2, seed=8), 1, zero_mean=True)[0]
    _, w1 = solve_ns_vorticity(w0, 0.0, None, 0.0, 0.5, fine=32)
    assert abs(w1.mean()) <= 1e-8


def test_ns_nonzero_mean_warns():
    with pytest.warns(UserWarning):
        solve_ns_vorticity(np.ones((16, 16)), forcing=None, t0=0.0, t1=0.01, fine=16)


@pytest.mark.slow
def test_ns_grid_refinement():
    w0 = sample_grf(GrfSpec(64, 2, seed=12), 1, zero_mean=True)[0]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        _, a = solve_ns_vorticity(w0, fine=64, out=8)
        _, b = solve_ns_vorticity(w0, fine=128, out=8)
    assert np.linalg.norm(a - b) / np.linalg.norm(b) <= 1e-2


# --- datasets --------------------------------------------------------------------

def test_burgers_dataset_shapes_and_meta():
    d = burgers_dataset(3, seed=2)
    assert d.inputs.shape == (3, 8) and d.targets.shape == (3, 8)
    assert d.meta["viscosity"] == 0.1 and d.meta["seed"] == 2
    np.testing.assert_array_equal(d.inputs, burgers_dataset(3, seed=2).inputs)


def test_ns_dataset_small():
    d = navier_stokes_dataset(1, seed=0, fine=32, t0=0.5, t1=1.0)
    assert d.inputs.shape == (1, 8, 8)
    assert "forcing" in d.meta


def test_shock_split():
    train, test = shock_datasets(fine=256, t_max=1.0, snap_dt=0.1, t_split=0.5)
    assert len(train) == 5 and len(test) == 5
    np.testing.assert_allclose(train.targets[:-1], train.inputs[1:])
