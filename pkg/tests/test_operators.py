import numpy as np
import pytest
import scipy.linalg

from nmrsim.operators import (
    NonHermitianError,
    State,
    avg_gate_fidelity,
    coherence_order_decomposition,
    embed,
    expm_general,
    expm_hermitian,
    kron,
    order_intensities,
    spin_operator,
    total_spin,
)

from conftest import random_hermitian, random_unitary


def test_spin_commutation_relations():
    for n in (1, 3):
        for k in range(1, n + 1):
            ix, iy, iz = (spin_operator(n, k, a) for a in "xyz")
            assert np.allclose(ix @ iy - iy @ ix, 1j * iz)
            assert np.allclose(iy @ iz - iz @ iy, 1j * ix)


def test_spin_one_is_most_significant():
    iz1 = spin_operator(2, 1, "z")
    # |01> has index 1: spin 1 up
    assert np.allclose(np.diagonal(iz1), [0.5, 0.5, -0.5, -0.5])
    assert np.allclose(spin_operator(2, 2, "z").diagonal(), [0.5, -0.5, 0.5, -0.5])


def test_raising_operator():
    ip = spin_operator(1, 1, "+")
    assert np.allclose(ip, spin_operator(1, 1, "x") + 1j * spin_operator(1, 1, "y"))
    # |1> (down) -> |0> (up)
    assert np.allclose(ip @ [0, 1], [1, 0])


def test_embed_matches_kron():
    a = np.array([[1, 2], [3, 4]], dtype=complex)
    assert np.allclose(embed(a, 3, 2), kron(np.eye(2), a, np.eye(2)))


def test_expm_hermitian_matches_scipy(rng):
    h = random_hermitian(rng, 8)
    assert np.allclose(expm_hermitian(h, 0.37), scipy.linalg.expm(-0.37j * h), atol=1e-12)
    assert np.allclose(expm_general(h, 0.37), scipy.linalg.expm(-0.37j * h), atol=1e-12)


def test_expm_hermitian_diagonal_shortcut():
    h = np.diag([1.0, -2.0, 3.0, 0.5])
    assert np.allclose(expm_hermitian(h, 2.0), np.diag(np.exp(-2j * np.diagonal(h))))


def test_expm_hermitian_rejects_non_hermitian():
    with pytest.raises(NonHermitianError):
        expm_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))


def test_avg_gate_fidelity_values(rng):
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    assert avg_gate_fidelity(np.eye(2), np.eye(2)) == pytest.approx(1.0)
    assert avg_gate_fidelity(np.eye(2), x) == pytest.approx(1 / 3)
    u = random_unitary(rng, 4)
    assert avg_gate_fidelity(u, np.exp(0.7j) * u) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        avg_gate_fidelity(np.eye(2), np.eye(4))


def test_coherence_orders_sum_back(rng):
    a = random_hermitian(rng, 8)
    for axis in ("z", "x"):
        parts = coherence_order_decomposition(a, axis)
        assert np.allclose(sum(parts.values()), a)


def test_coherence_order_of_ladder_operators():
    ip = spin_operator(2, 1, "+") @ spin_operator(2, 2, "+")
    assert set(coherence_order_decomposition(ip)) == {2}
    assert set(coherence_order_decomposition(total_spin(3, "z"))) == {0}
    # I_z is transverse when quantized along x
    assert set(coherence_order_decomposition(total_spin(3, "z"), "x")) == {-1, 1}
    inten = order_intensities(total_spin(2, "x"), "x")
    assert inten[0] > 0 and inten[1] == 0 and inten[-1] == 0


def test_state_kinds_and_checks():
    s = State.basis("01")
    assert s.kind == "pure"
    assert np.allclose(s.populations(), [0, 1, 0, 0])
    assert s.purity() == pytest.approx(1.0)
    mm = State.maximally_mixed(2)
    assert mm.purity() == pytest.approx(0.25)
    with pytest.raises(ValueError):
        State(np.eye(3))
    with pytest.raises(ValueError):
        State(np.eye(2), "bogus")


def test_state_evolve_expectation():
    s = State.basis("0")
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    out = s.evolve(x)
    assert out.expect(spin_operator(1, 1, "z")) == pytest.approx(-0.5)
