"""Gate-level circuits, their exact unitaries, and compilation to pulse programs.

Qubit ``q`` is spin ``q`` (1-based, spin 1 = most significant bit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .operators import embed
from .program import FrameZ, Pulse, PulseProgram, RotationSpec, program
from .sequence import compile_cnot, compile_cphase
from .spins import SpinSystem

_ARITY = {"h": 1, "x": 1, "z": 1, "rz": 1, "t": 1, "tdg": 1, "cnot": 2, "cz": 2, "cphase": 2, "swap": 2, "ccx": 3, "cswap": 3}
_PARAM = {"rz", "cphase"}


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    param: float = 0.0

    def __post_init__(self):
        if self.name not in _ARITY:
            raise ValueError(f"unknown gate {self.name!r}")
        q = tuple(int(v) for v in self.qubits)
        if len(q) != _ARITY[self.name] or len(set(q)) != len(q):
            raise ValueError(f"gate {self.name} needs {_ARITY[self.name]} distinct qubits, got {q}")
        object.__setattr__(self, "qubits", q)


def g(name: str, *qubits: int, param: float = 0.0) -> Gate:
    return Gate(name, qubits, param)


_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_SINGLE = {
    "h": lambda p: _H,
    "x": lambda p: _X,
    "z": lambda p: np.diag([1, -1]).astype(complex),
    "rz": lambda p: np.diag([np.exp(-0.5j * p), np.exp(0.5j * p)]),
    "t": lambda p: np.diag([1, np.exp(0.25j * math.pi)]),
    "tdg": lambda p: np.diag([1, np.exp(-0.25j * math.pi)]),
}


def _bit(index: np.ndarray, n: int, q: int) -> np.ndarray:
    return (index >> (n - q)) & 1


def gate_matrix(gate: Gate, n: int) -> np.ndarray:
    """Exact ``2^n x 2^n`` matrix of one gate (no global-phase freedom)."""
    if max(gate.qubits) > n:
        raise ValueError(f"gate {gate} exceeds {n} qubits")
    if gate.name in _SINGLE:
        return embed(_SINGLE[gate.name](gate.param), n, gate.qubits[0])
    d = 2**n
    idx = np.arange(d)
    if gate.name in ("cz", "cphase"):
        a, b = gate.qubits
        phi = math.pi if gate.name == "cz" else gate.param
        both = (_bit(idx, n, a) & _bit(idx, n, b)).astype(bool)
        return np.diag(np.where(both, np.exp(1j * phi), 1.0))
    out = idx.copy()
    if gate.name == "cnot":
        c, t = gate.qubits
        out = np.where(_bit(idx, n, c) == 1, idx ^ (1 << (n - t)), idx)
    elif gate.name == "ccx":
        c1, c2, t = gate.qubits
        on = (_bit(idx, n, c1) & _bit(idx, n, c2)) == 1
        out = np.where(on, idx ^ (1 << (n - t)), idx)
    elif gate.name in ("swap", "cswap"):
        if gate.name == "swap":
            a, b = gate.qubits
            on = np.ones(d, dtype=bool)
        else:
            c, a, b = gate.qubits
            on = _bit(idx, n, c) == 1
        differ = _bit(idx, n, a) != _bit(idx, n, b)
        flip = (1 << (n - a)) | (1 << (n - b))
        out = np.where(on & differ, idx ^ flip, idx)
    return permutation_matrix(out)


def permutation_matrix(images) -> np.ndarray:
    """Matrix sending basis state ``j`` to ``images[j]``."""
    images = np.asarray(images)
    d = images.size
    if sorted(images.tolist()) != list(range(d)):
        raise ValueError("not a permutation")
    m = np.zeros((d, d), dtype=complex)
    m[images, np.arange(d)] = 1
    return m


def circuit_unitary(gates, n: int) -> np.ndarray:
    u = np.eye(2**n, dtype=complex)
    for gate in gates:
        u = gate_matrix(gate, n) @ u
    return u


def decompose(gates) -> list[Gate]:
    """Rewrite into {h, x, rz, t, tdg, cnot, cz, cphase}.

    Toffoli uses the standard 6-CNOT, 7-T network; Fredkin is
    ``CNOT(b,a) Toffoli(c,a,b) CNOT(b,a)``; SWAP is three CNOTs.
    """
    out: list[Gate] = []
    for gate in gates:
        if gate.name == "swap":
            a, b = gate.qubits
            out += [g("cnot", a, b), g("cnot", b, a), g("cnot", a, b)]
        elif gate.name == "ccx":
            a, b, c = gate.qubits
            out += [
                g("h", c), g("cnot", b, c), g("tdg", c), g("cnot", a, c), g("t", c), g("cnot", b, c),
                g("tdg", c), g("cnot", a, c), g("t", b), g("t", c), g("h", c), g("cnot", a, b),
                g("t", a), g("tdg", b), g("cnot", a, b),
            ]
        elif gate.name == "cswap":
            c, a, b = gate.qubits
            out += [g("cnot", b, a)] + decompose([g("ccx", c, a, b)]) + [g("cnot", b, a)]
        else:
            out.append(gate)
    return out


def compile_circuit(gates, sys: SpinSystem, refocus: bool = True) -> PulseProgram:
    """Pulse program equal to the circuit up to a global phase (ideal pulses).

    Single-qubit gates: ``H = R_y(90) Z``, ``X = R_x(180)``, diagonal gates
    as frame rotations. Two-qubit gates through the coupling network.
    """
    parts: list = []
    for gate in decompose(gates):
        q = gate.qubits
        if gate.name == "h":
            parts += [FrameZ(q[0], math.pi), Pulse(RotationSpec.xy(math.pi / 2, math.pi / 2, q[0]))]
        elif gate.name == "x":
            parts.append(Pulse(RotationSpec.xy(0.0, math.pi, q[0])))
        elif gate.name == "z":
            parts.append(FrameZ(q[0], math.pi))
        elif gate.name == "rz":
            parts.append(FrameZ(q[0], gate.param))
        elif gate.name == "t":
            parts.append(FrameZ(q[0], math.pi / 4))
        elif gate.name == "tdg":
            parts.append(FrameZ(q[0], -math.pi / 4))
        elif gate.name == "cnot":
            parts.append(compile_cnot(q[0], q[1], sys, refocus))
        elif gate.name == "cz":
            parts.append(compile_cphase(q[0], q[1], sys, math.pi, refocus))
        elif gate.name == "cphase":
            parts.append(compile_cphase(q[0], q[1], sys, gate.param, refocus))
        else:  # pragma: no cover - decompose covers everything else
            raise ValueError(f"cannot compile {gate.name}")
    return program(*parts)


def qft_gates(qubits, inverse: bool = False) -> list[Gate]:
    """QFT on ``qubits`` (first = most significant), including the final bit reversal."""
    qs = list(qubits)
    out: list[Gate] = []
    for i, q in enumerate(qs):
        out.append(g("h", q))
        for j, r in enumerate(qs[i + 1 :], start=2):
            out.append(g("cphase", r, q, param=2 * math.pi / 2**j))
    for i in range(len(qs) // 2):
        out.append(g("swap", qs[i], qs[-1 - i]))
    if inverse:
        out = [Gate(x.name, x.qubits, -x.param) for x in reversed(out)]
    return out


def qft_matrix(n: int, inverse: bool = False) -> np.ndarray:
    d = 2**n
    sign = -1 if inverse else 1
    jk = np.outer(np.arange(d), np.arange(d))
    return np.exp(sign * 2j * np.pi * jk / d) / math.sqrt(d)
