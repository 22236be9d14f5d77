import math

import numpy as np
import pytest

from nmrsim.circuits import Gate, circuit_unitary, compile_circuit, decompose, g, gate_matrix, qft_gates, qft_matrix
from nmrsim.operators import avg_gate_fidelity
from nmrsim.sequence import cnot_matrix, program_unitary
from nmrsim.spins import load_preset


def test_gate_validation():
    with pytest.raises(ValueError):
        g("cnot", 1, 1)
    with pytest.raises(ValueError):
        g("foo", 1)
    with pytest.raises(ValueError):
        gate_matrix(g("x", 3), 2)


def test_cnot_matches_sequence_oracle():
    for c, t in ((1, 2), (3, 1)):
        assert np.allclose(gate_matrix(g("cnot", c, t), 3), cnot_matrix(3, c, t))


def test_toffoli_and_fredkin_truth_tables():
    tof = gate_matrix(g("ccx", 1, 2, 3), 3)
    assert np.allclose(tof @ np.eye(8)[:, 6], np.eye(8)[:, 7])
    assert np.allclose(tof @ np.eye(8)[:, 5], np.eye(8)[:, 5])
    fred = gate_matrix(g("cswap", 1, 2, 3), 3)
    assert np.allclose(fred @ np.eye(8)[:, 0b101], np.eye(8)[:, 0b110])
    assert np.allclose(fred @ np.eye(8)[:, 0b001], np.eye(8)[:, 0b001])


@pytest.mark.parametrize("gate", [g("swap", 1, 3), g("ccx", 3, 1, 2), g("cswap", 2, 3, 1)])
def test_decompositions_exact(gate):
    assert np.allclose(circuit_unitary(decompose([gate]), 3), gate_matrix(gate, 3), atol=1e-12)


@pytest.mark.parametrize("inverse", [False, True])
def test_qft_against_dft(inverse):
    u = circuit_unitary(qft_gates([1, 2, 3], inverse), 3)
    assert np.allclose(u, qft_matrix(3, inverse), atol=1e-12)


def test_compiled_circuit_on_three_spin():
    sys = load_preset("three_spin")
    gates = [g("h", 1), g("cnot", 1, 2), g("t", 3), g("cphase", 2, 3, param=0.7), g("cswap", 1, 2, 3)]
    u_pulse = program_unitary(compile_circuit(gates, sys), sys)
    assert 1 - avg_gate_fidelity(circuit_unitary(gates, 3), u_pulse) < 1e-12


def test_rz_convention():
    u = gate_matrix(Gate("rz", (1,), 0.4), 1)
    assert np.allclose(u, np.diag([np.exp(-0.2j), np.exp(0.2j)]))
    assert np.allclose(gate_matrix(g("cz", 1, 2), 2), np.diag([1, 1, 1, -1]))
    assert math.isclose(np.angle(gate_matrix(g("t", 1), 1)[1, 1]), math.pi / 4)
