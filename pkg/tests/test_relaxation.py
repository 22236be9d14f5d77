import math

import numpy as np
import pytest
import scipy.linalg

from nmrsim.operators import State, spin_operator
from nmrsim.relaxation import (
    KickModel,
    RelaxationModel,
    _simulate,
    damping_step,
    evolve_with_relaxation,
    fit_decay_rate,
    kick_model_run,
    lindblad_superoperator,
    linear_fit,
    sample_rng,
)
from nmrsim.spins import SpinSystem, internal_hamiltonian

from conftest import random_hermitian


def _random_state(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def _lindblad_evolve(rho, h, rm, t):
    d = rho.shape[0]
    vec = scipy.linalg.expm(lindblad_superoperator(h, rm) * t) @ rho.reshape(-1)
    return vec.reshape(d, d)


def test_model_validation():
    with pytest.raises(ValueError):
        RelaxationModel((1.0,), (3.0,))
    with pytest.raises(ValueError):
        RelaxationModel((1.0, 2.0), (1.0,))
    with pytest.raises(ValueError):
        RelaxationModel.uniform(1, 1.0, 1.0, ground_population=1.5)
    assert RelaxationModel((1.0,), (2.0,)).ground_population == (0.5,)


def test_damping_step_equals_lindblad_without_hamiltonian(rng):
    rm = RelaxationModel((0.8, 1.5), (0.3, 2.0), (0.7, 0.55))
    rho = _random_state(rng, 4)
    got = damping_step(rho, rm, 0.4)
    assert np.allclose(got, _lindblad_evolve(rho, np.zeros((4, 4)), rm, 0.4), atol=1e-13)


def test_strang_splitting_converges_to_lindblad(rng):
    rm = RelaxationModel.uniform(2, 0.05, 0.02, 0.6)
    h = random_hermitian(rng, 4) * 50
    rho = _random_state(rng, 4)
    exact = _lindblad_evolve(rho, h, rm, 0.03)
    errs = []
    for dt in (1e-3, 5e-4):
        errs.append(np.max(np.abs(evolve_with_relaxation(State(rho), h, rm, 0.03, dt).rho - exact)))
    assert errs[1] < 1e-5
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)  # second order


def test_relaxation_is_cptp_and_reaches_equilibrium(rng):
    rm = RelaxationModel.uniform(1, 0.1, 0.05, ground_population=0.8)
    h = internal_hamiltonian(SpinSystem(offsets_hz=(30.0,)))
    out = evolve_with_relaxation(State(_random_state(rng, 2)), h, rm, 3.0, 1e-3)
    assert np.trace(out.rho) == pytest.approx(1.0)
    assert np.all(np.linalg.eigvalsh(out.rho) > -1e-12)
    assert np.allclose(out.rho, np.diag([0.8, 0.2]), atol=1e-10)


def test_t2_decay_of_coherence():
    rm = RelaxationModel.uniform(1, math.inf, 0.02)
    rho = State(np.array([[0.5, 0.5], [0.5, 0.5]]))
    out = evolve_with_relaxation(rho, np.zeros((2, 2)), rm, 0.01, 1e-4)
    assert out.rho[0, 1].real == pytest.approx(0.5 * math.exp(-0.5), rel=1e-12)


def test_large_step_warns():
    rm = RelaxationModel.uniform(1, 0.01, 0.01)
    with pytest.warns(RuntimeWarning):
        evolve_with_relaxation(State.basis("0"), np.zeros((2, 2)), rm, 0.01, 0.01)


def test_fit_decay_rate_exact():
    t = np.linspace(0, 1, 50)
    fit = fit_decay_rate(np.exp(-3 * t), t)
    assert fit.rate_per_s == pytest.approx(3.0, abs=1e-6)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit_decay_rate(np.ones(10)).rate_per_s == 0.0
    bad = fit_decay_rate(np.zeros(10))
    assert math.isnan(bad.rate_per_s) and bad.r_squared == 0.0
    with pytest.raises(ValueError):
        fit_decay_rate([1, 0.5, 0.2])


def test_linear_fit():
    a, b, r2 = linear_fit([0, 1, 2, 3], [1, 3, 5, 7])
    assert (a, b, r2) == pytest.approx((2.0, 1.0, 1.0))


def test_kick_model_validation():
    with pytest.raises(ValueError):
        KickModel(2, (1.0,), 10.0)
    with pytest.raises(ValueError):
        KickModel(1, (1.0,), 10.0, kick_angle_dist="cauchy")
    with pytest.raises(ValueError):
        KickModel(10, (1.0,) * 10, 10.0)


def test_sample_rng_counter_based():
    a = sample_rng(5, 3).normal(size=4)
    b = sample_rng(5, 3).normal(size=4)
    c = sample_rng(5, 4).normal(size=4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_no_kicks_z_environment_keeps_magnitude():
    km = KickModel(2, (300.0, 500.0), 0.0, omega_sys_hz=40.0)
    run = kick_model_run(km, 0.01, 3, 51)
    assert np.allclose(np.abs(run.average), 0.5)


def test_no_kicks_x_environment_recurrences():
    j = (700.0, 850.0, 1000.0, 1200.0)
    km = KickModel(4, j, 0.0, env_state="x")
    run = kick_model_run(km, 0.02, 1, 201)
    expect = 0.5 * np.prod([np.abs(np.cos(np.pi * jk * run.times_s)) for jk in j], axis=0)
    assert np.allclose(np.abs(run.single), expect, atol=1e-12)
    # all couplings are multiples of 50 Hz: full revival at 20 ms
    assert abs(run.single[-1]) == pytest.approx(0.5)


def test_kick_average_is_bit_flip_channel():
    # one environment spin, one kick: the kick average equals a bit flip with
    # p = E[sin^2(theta/2)] = (1 - exp(-sigma^2/2)) / 2
    sigma = 0.4
    km = KickModel(1, (400.0,), 1.0 / 0.004, sigma_rad=sigma, omega_env_hz=(1300.0,))
    times = np.linspace(0, 0.01, 41)
    kicks = np.array([0.004])
    nodes, weights = np.polynomial.hermite_e.hermegauss(60)
    weights = weights / weights.sum()
    traj = _simulate(km, times, kicks, (sigma * nodes)[:, None, None])
    averaged = weights @ traj
    no_flip = _simulate(km, times, kicks, np.zeros((1, 1, 1)))[0]
    flip = _simulate(km, times, kicks, np.full((1, 1, 1), np.pi))[0]
    p = (1 - math.exp(-(sigma**2) / 2)) / 2
    assert np.allclose(averaged, (1 - p) * no_flip + p * flip, atol=1e-12)


def test_kick_run_deterministic_and_thread_independent():
    km = KickModel(3, (500.0, 700.0, 900.0), 20000.0, sigma_rad=0.1, omega_env_hz=(3000.0, -4000.0, 5000.0), seed=7)
    a = kick_model_run(km, 0.002, 16, 21, threads=1)
    b = kick_model_run(km, 0.002, 16, 21, threads=4)
    assert np.array_equal(a.average, b.average)
    c = kick_model_run(km, 0.002, 4, 21)
    assert np.array_equal(a.single, c.single)
    assert a.n_kicks == 40


def test_poisson_timing_runs():
    km = KickModel(2, (500.0, 700.0), 5000.0, timing="poisson", seed=1)
    run = kick_model_run(km, 0.004, 4, 21)
    assert run.average.shape == (21,)
    assert abs(run.average[0]) == pytest.approx(0.5)
    assert 10 < run.n_kicks < 30


def test_kicks_preserve_norm():
    km = KickModel(2, (500.0, 700.0), 1.0e4, kick_angle_dist="uniform_0_2pi")
    traj = _simulate(km, np.linspace(0, 1e-3, 5), np.array([2e-4, 5e-4]), np.full((3, 2, 2), 1.1))
    assert np.all(np.abs(traj) <= 0.5 + 1e-12)
