import math

import numpy as np
import pytest
import scipy.linalg

from nmrsim.control import rotation_propagator
from nmrsim.operators import State, spin_operator
from nmrsim.program import RotationSpec
from nmrsim.readout import (
    AcquisitionConfig,
    Spectrum,
    acquire_fid,
    count_lines,
    peak_integrals,
    read_fid_csv,
    simulate_readout,
    spectrum,
    transition_frequencies,
    write_fid_csv,
)
from nmrsim.spins import SpinSystem, internal_hamiltonian, load_preset


def _readout(sys, rho, k, linewidth_fraction=0.1):
    u = rotation_propagator(RotationSpec.xy(0.0, math.pi / 2, k), sys.n_spins)
    cfg = AcquisitionConfig.auto(sys, k, linewidth_fraction=linewidth_fraction)
    return simulate_readout(sys, u @ rho @ u.conj().T, cfg)


def test_fid_matches_direct_evaluation(rng):
    sys = load_preset("two_spin")
    h = internal_hamiltonian(sys)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = (a + a.conj().T) / 2
    cfg = AcquisitionConfig(observe_spin=2, n_points=16, dwell_s=2e-4, v0=1.5, line_broadening_hz=3.0)
    fid = acquire_fid(rho, h, cfg)
    det = 1j * spin_operator(2, 2, "x") + spin_operator(2, 2, "y")
    for j, t in enumerate(cfg.times_s):
        u = scipy.linalg.expm(-1j * h * t)
        v = -2 * 1.5 * np.trace(u @ rho @ u.conj().T @ det) * math.exp(-math.pi * 3.0 * t)
        assert fid[j] == pytest.approx(v, abs=1e-12)


def test_positive_offset_appears_at_positive_frequency():
    sys = SpinSystem(offsets_hz=(300.0,))
    cfg = AcquisitionConfig(n_points=1024, dwell_s=1e-3 / 2, line_broadening_hz=2.0)
    fid = acquire_fid(spin_operator(1, 1, "x"), internal_hamiltonian(sys), cfg)
    spec = spectrum(fid, cfg)
    assert spec.frequencies_hz[np.argmax(np.abs(spec.amplitudes))] == pytest.approx(300.0, abs=spec.bin_hz)


def test_peak_integrals_follow_populations():
    # integrals a-c, b-d (spin 1) and a-b, c-d (spin 2) for a diagonal state
    a, b, c, d = 0.5, 0.25, 0.15, 0.1
    sys = load_preset("two_spin")
    rho = np.diag([a, b, c, d]).astype(complex)
    got = {}
    for k in (1, 2):
        _, spec = _readout(sys, rho, k, linewidth_fraction=0.01)
        lo, hi = transition_frequencies(sys, k)
        mid = (lo + hi) / 2
        got[k] = peak_integrals(spec, [(lo - 50, mid), (mid, hi + 50)])
    # J > 0: the line with the partner in |0> is the upper one
    assert got[1][1] / got[1][0] == pytest.approx((a - c) / (b - d), rel=0.02)
    assert got[2][1] / got[2][0] == pytest.approx((a - b) / (c - d), rel=0.02)
    assert got[1][1] / got[2][1] == pytest.approx((a - c) / (a - b), rel=0.02)


def test_phase_from_first_point_handles_asymmetric_windows():
    sys = SpinSystem(offsets_hz=(100.0, 0.0), j_hz=[[0, 40.0], [40.0, 0]])
    rho = np.exp(0.6j) * (spin_operator(2, 1, "+") @ np.diag([0.7, 0.3, 0.7, 0.3])) * -1j
    cfg = AcquisitionConfig(n_points=4096, dwell_s=1e-3, line_broadening_hz=0.5)
    spec = spectrum(acquire_fid(rho, internal_hamiltonian(sys), cfg), cfg)
    ints = peak_integrals(spec, [(60, 95), (95, 200)])
    assert ints[1] / ints[0] == pytest.approx(0.7 / 0.3, rel=0.01)


def test_integrals_independent_of_acquisition():
    sys = SpinSystem(offsets_hz=(200.0,))
    vals = []
    for n, dwell in ((2048, 1e-3), (8192, 4e-4)):
        cfg = AcquisitionConfig(n_points=n, dwell_s=dwell, line_broadening_hz=5.0)
        spec = spectrum(acquire_fid(spin_operator(1, 1, "x"), internal_hamiltonian(sys), cfg), cfg)
        vals.append(peak_integrals(spec, [(100, 300)])[0])
    assert vals[0] == pytest.approx(vals[1], rel=0.01)


def test_peak_integral_window_errors():
    spec = Spectrum(np.linspace(-10, 10, 21), np.ones(21), {"dwell_s": 0.05})
    with pytest.raises(ValueError):
        peak_integrals(spec, [(0, 5), (4, 6)])
    with pytest.raises(ValueError):
        peak_integrals(spec, [(5, 5)])
    with pytest.raises(ValueError):
        peak_integrals(spec, [(-50, 0)])


@pytest.mark.parametrize("name,spin,lines", [("five_spin", 1, 16), ("five_spin", 3, 16), ("seven_spin", 1, 64)])
def test_line_counts(name, spin, lines):
    sys = load_preset(name)
    assert len(transition_frequencies(sys, spin)) == lines
    n = sys.n_spins
    rho = sum(spin_operator(n, k, "z") for k in range(1, n + 1))
    _, spec = _readout(sys, rho, spin)
    assert count_lines(spec) == lines


def test_auto_config_resolves_lines():
    sys = load_preset("three_spin")
    cfg = AcquisitionConfig.auto(sys, 2)
    f = transition_frequencies(sys, 2)
    assert 1 / (2 * cfg.dwell_s) > np.max(np.abs(f))
    assert cfg.n_points & (cfg.n_points - 1) == 0
    with pytest.raises(ValueError):
        AcquisitionConfig.auto(sys, 2, max_points=64)


def test_config_validation():
    with pytest.raises(ValueError):
        AcquisitionConfig(n_points=1)
    with pytest.raises(ValueError):
        AcquisitionConfig.from_dict({"n_points": 8, "gain": 2})
    with pytest.raises(ValueError):
        acquire_fid(np.eye(2), np.eye(4), AcquisitionConfig())


def test_fid_csv_round_trip(tmp_path):
    sys = load_preset("two_spin")
    fid, spec = simulate_readout(sys, spin_operator(2, 1, "x"), AcquisitionConfig(n_points=64, dwell_s=1e-3))
    cfg = AcquisitionConfig(n_points=64, dwell_s=1e-3)
    path = write_fid_csv(tmp_path / "fid.csv", fid, cfg)
    again, cfg2 = read_fid_csv(path)
    assert np.array_equal(again, fid)
    assert cfg2 == cfg
    spec.to_csv(tmp_path / "spec.csv")
    assert (tmp_path / "spec.json").exists()
