import numpy as np
import pytest

from nmrsim.operators import State, commutator, order_intensities, spin_operator, total_spin
from nmrsim.spins import (
    PRESETS,
    SpinSystem,
    ThermalParams,
    deviation_state,
    dipolar_chain,
    internal_hamiltonian,
    load_preset,
    thermal_state,
    x_basis_dipolar,
)

H_PLANCK = 6.62607015e-34
K_B = 1.380649e-23


@pytest.mark.parametrize("name", PRESETS)
def test_presets_load_and_round_trip(name):
    sys = load_preset(name)
    again = SpinSystem.from_dict(sys.to_dict())
    assert again.to_dict() == sys.to_dict()
    assert np.allclose(sys.j_hz, sys.j_hz.T)


def test_unknown_preset():
    with pytest.raises(ValueError):
        load_preset("nine_spin")


def test_spin_system_validation():
    with pytest.raises(ValueError):
        SpinSystem(offsets_hz=(0.0, 1.0), j_hz=[[0, 1], [2, 0]])
    with pytest.raises(ValueError):
        SpinSystem(offsets_hz=())
    with pytest.raises(ValueError):
        SpinSystem.from_dict({"spins": [{"offset_hz": 0}], "extra": 1})


def test_weak_j_hamiltonian_diagonal():
    sys = SpinSystem(offsets_hz=(100.0, -50.0), j_hz=[[0, 10.0], [10.0, 0]])
    h = internal_hamiltonian(sys)
    z1, z2 = 0.5 * np.array([1, 1, -1, -1]), 0.5 * np.array([1, -1, 1, -1])
    expect = 2 * np.pi * (100 * z1 - 50 * z2 + 10 * z1 * z2)
    assert np.allclose(h, np.diag(expect))


def test_full_j_commutes_with_total_iz():
    sys = SpinSystem(offsets_hz=(100.0, -50.0), j_hz=[[0, 10.0], [10.0, 0]], coupling_model="full_j")
    h = internal_hamiltonian(sys)
    assert np.allclose(commutator(h, total_spin(2, "z")), 0)
    assert np.count_nonzero(np.abs(h - np.diag(np.diagonal(h))) > 1e-9) == 2


def test_thermal_polarization_proton():
    sys = SpinSystem(offsets_hz=(0.0,), gamma_hz_per_tesla=(42.577478e6,))
    tp = ThermalParams.for_system(sys, 11.74, 300.0)
    expect = np.tanh(H_PLANCK * 42.577478e6 * 11.74 / (2 * K_B * 300.0))
    assert tp.polarization()[0] == pytest.approx(expect, rel=1e-12)
    assert 3e-5 < expect < 5e-5


def test_thermal_high_temperature_matches_exact():
    sys = load_preset("two_spin")
    tp = ThermalParams.for_system(sys)
    exact = thermal_state(sys, tp, "exact").rho
    approx = thermal_state(sys, tp, "high_temperature").rho
    dev = exact - np.eye(4) / 4
    assert np.allclose(approx, exact, rtol=0, atol=1e-3 * np.max(np.abs(dev)))
    # proton polarization larger than carbon (gamma ratio ~4)
    p = np.real(np.diagonal(dev))
    pol1 = (p[0] + p[1]) - (p[2] + p[3])
    pol2 = (p[0] + p[2]) - (p[1] + p[3])
    assert pol1 / pol2 == pytest.approx(42577478.0 / 10708400.0, rel=1e-6)


def test_thermal_state_errors():
    sys = load_preset("two_spin")
    with pytest.raises(ValueError):
        thermal_state(sys, ThermalParams.for_system(sys), "low_temperature")
    with pytest.raises(ValueError):
        ThermalParams(-1.0, 300.0, (1.0,))


def test_deviation_state_traceless():
    s = deviation_state(load_preset("three_spin"))
    assert s.kind == "deviation"
    assert abs(np.trace(s.rho)) < 1e-15


def test_dipolar_chain_structure():
    sys = dipolar_chain(4, 1000.0)
    assert sys.d_hz[0, 1] == pytest.approx(1000.0)
    assert sys.d_hz[0, 2] == pytest.approx(125.0)
    h = internal_hamiltonian(sys)
    assert np.allclose(commutator(h, total_spin(4, "z")), 0, atol=1e-9)


def test_dipolar_orders_z_and_x():
    sys = dipolar_chain(5, 1000.0)
    h = internal_hamiltonian(sys)
    z = order_intensities(h, "z")
    x = order_intensities(h, "x")
    assert all(v <= 1e-12 * z[0] for p, v in z.items() if p != 0)
    assert all(v <= 1e-12 * x[0] for p, v in x.items() if p not in (0, 2, -2))
    assert x[2] > 0 and x[-2] > 0


def test_x_basis_dipolar_representations():
    sys = dipolar_chain(3, 800.0)
    h_lab = x_basis_dipolar(sys, "lab")
    h_z = internal_hamiltonian(sys)
    assert np.allclose(h_lab, h_z)
    ry = np.eye(1)
    for _ in range(3):
        c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
        ry = np.kron(ry, np.array([[c, -s], [s, c]]))
    conj = ry @ h_z @ ry.conj().T
    assert np.allclose(x_basis_dipolar(sys, "x_eigenbasis"), conj)


def test_dipolar_requires_shared_offset():
    sys = SpinSystem(offsets_hz=(0.0, 10.0), d_hz=[[0, 1], [1, 0]], coupling_model="dipolar_truncated")
    with pytest.raises(ValueError):
        internal_hamiltonian(sys)
