"""Desk-scale simulator for NMR quantum information processing."""

from .operators import (
    State,
    avg_gate_fidelity,
    coherence_order_decomposition,
    expm_general,
    expm_hermitian,
    kron,
    spin_operator,
)
from .spins import SpinSystem, ThermalParams, internal_hamiltonian, thermal_state

__version__ = "0.1.0"

__all__ = [
    "State",
    "SpinSystem",
    "ThermalParams",
    "avg_gate_fidelity",
    "coherence_order_decomposition",
    "expm_general",
    "expm_hermitian",
    "internal_hamiltonian",
    "kron",
    "spin_operator",
    "thermal_state",
]
