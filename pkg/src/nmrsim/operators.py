"""Dense spin-1/2 operator algebra.

Conventions used throughout the package:

* Spin indices are 1-based; spin 1 is the leftmost tensor factor, so the
  basis state ``|q1 q2 ... qN>`` has index ``q1*2**(N-1) + ... + qN``.
* ``|0>`` is spin-up, ``I_z|0> = +1/2 |0>``.
* Hamiltonians are in angular frequency (rad/s); propagators are
  ``exp(-i H t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache, reduce

import numpy as np
import scipy.linalg

MAX_SPINS = 10

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_SINGLE = {
    "x": _PAULI["x"] / 2,
    "y": _PAULI["y"] / 2,
    "z": _PAULI["z"] / 2,
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
}


class NonHermitianError(ValueError):
    """Raised when an operator expected to be Hermitian is not."""


def n_spins_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two >= 2")
    return n


def single_spin(axis: str) -> np.ndarray:
    """2x2 spin-1/2 operator for ``axis`` in {x, y, z, +, -}."""
    try:
        return _SINGLE[axis].copy()
    except KeyError:
        raise ValueError(f"unknown axis {axis!r}") from None


def kron(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of the operands, leftmost first."""
    if not ops:
        raise ValueError("kron needs at least one operand")
    return reduce(np.kron, ops)


def embed(op: np.ndarray, n_spins: int, k: int) -> np.ndarray:
    """Place a 2x2 operator on spin ``k`` (1-based) of an ``n_spins`` register."""
    if not 1 <= k <= n_spins:
        raise ValueError(f"spin index {k} out of range 1..{n_spins}")
    left = np.eye(2 ** (k - 1))
    right = np.eye(2 ** (n_spins - k))
    return np.kron(np.kron(left, op), right)


@lru_cache(maxsize=512)
def _spin_operator_cached(n_spins: int, k: int, axis: str) -> np.ndarray:
    out = embed(single_spin(axis), n_spins, k)
    out.flags.writeable = False
    return out


def spin_operator(n_spins: int, k: int, axis: str) -> np.ndarray:
    """Return ``I_axis`` acting on spin ``k`` of ``n_spins`` spins.

    ``axis`` is one of ``x, y, z`` (half Pauli) or ``+, -``
    (``I_x +/- i I_y``).
    """
    if n_spins < 1 or n_spins > MAX_SPINS:
        raise ValueError(f"n_spins must be in 1..{MAX_SPINS}")
    if not 1 <= k <= n_spins:
        raise ValueError(f"spin index {k} out of range 1..{n_spins}")
    if axis not in _SINGLE:
        raise ValueError(f"unknown axis {axis!r}")
    return _spin_operator_cached(n_spins, k, axis).copy()


def total_spin(n_spins: int, axis: str) -> np.ndarray:
    return sum(spin_operator(n_spins, k, axis) for k in range(1, n_spins + 1))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def is_hermitian(a: np.ndarray, atol: float = 1e-12) -> bool:
    return a.shape[0] == a.shape[1] and np.allclose(a, dagger(a), rtol=0, atol=atol)


def is_unitary(u: np.ndarray, atol: float = 1e-10) -> bool:
    return np.allclose(dagger(u) @ u, np.eye(u.shape[0]), rtol=0, atol=atol)


def expm_hermitian(h: np.ndarray, t: float = 1.0, atol: float = 1e-10) -> np.ndarray:
    """``exp(-i h t)`` for Hermitian ``h`` via eigendecomposition.

    Diagonal generators take a shortcut. Non-Hermitian input raises
    :class:`NonHermitianError`; use :func:`expm_general` for those.
    """
    h = np.asarray(h)
    if not is_hermitian(h, atol=atol * max(1.0, float(np.max(np.abs(h), initial=0.0)))):
        raise NonHermitianError("expm_hermitian requires a Hermitian generator")
    if not np.any(h - np.diag(np.diagonal(h))):
        return np.diag(np.exp(-1j * np.real(np.diagonal(h)) * t))
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ dagger(v)


def expm_general(a: np.ndarray, t: float = 1.0) -> np.ndarray:
    """``exp(-i a t)`` for arbitrary square ``a`` (scaling and squaring)."""
    return scipy.linalg.expm(-1j * t * np.asarray(a, dtype=complex))


def avg_gate_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """Average gate fidelity ``(d + |tr(u^dag v)|^2) / (d (d + 1))``.

    Insensitive to the global phase of either argument.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape or u.shape[0] != u.shape[1]:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    d = u.shape[0]
    overlap = np.vdot(u, v)  # tr(u^dag v)
    return float((d + abs(overlap) ** 2) / (d * (d + 1)))


def _magnetic_numbers(n_spins: int) -> np.ndarray:
    idx = np.arange(2**n_spins)
    bits = (idx[:, None] >> np.arange(n_spins - 1, -1, -1)) & 1
    return (0.5 - bits).sum(axis=1)


@lru_cache(maxsize=16)
def _x_basis(n_spins: int) -> np.ndarray:
    # columns are eigenvectors of total I_x with the same magnetic numbers as
    # the computational basis: |0> -> |+x>, |1> -> |-x>
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    out = kron(*([h] * n_spins))
    out.flags.writeable = False
    return out


def coherence_order_decomposition(a: np.ndarray, quantization_axis: str = "z", rtol: float = 1e-13) -> dict[int, np.ndarray]:
    """Split ``a`` into coherence-order components about ``z`` or ``x``.

    The order-``p`` component connects eigenspaces of the total spin
    projection whose magnetic numbers differ by ``p`` (row minus column), so
    a raising operator sits at ``p = +1``. Only orders with a nonzero
    component are returned (blocks below ``rtol * max|a|`` count as round-off);
    the values sum to ``a``.
    """
    a = np.asarray(a, dtype=complex)
    n = n_spins_of(a.shape[0])
    m = _magnetic_numbers(n)
    order = np.rint(m[:, None] - m[None, :]).astype(int)
    if quantization_axis == "z":
        w = None
        local = a
    elif quantization_axis == "x":
        w = _x_basis(n)
        local = dagger(w) @ a @ w
    else:
        raise ValueError("quantization_axis must be 'z' or 'x'")
    cut = rtol * float(np.max(np.abs(a), initial=0.0))
    out: dict[int, np.ndarray] = {}
    for p in range(-n, n + 1):
        mask = order == p
        block = np.where(mask, local, 0)
        if not np.any(np.abs(block) > cut):
            continue
        out[p] = block if w is None else w @ block @ dagger(w)
    return out


def order_intensities(a: np.ndarray, quantization_axis: str = "z") -> dict[int, float]:
    """Squared Frobenius norm of every coherence-order component."""
    n = n_spins_of(np.asarray(a).shape[0])
    parts = coherence_order_decomposition(a, quantization_axis)
    return {p: float(np.sum(np.abs(parts[p]) ** 2)) if p in parts else 0.0 for p in range(-n, n + 1)}


_KINDS = ("pure", "mixed", "deviation")


@dataclass(frozen=True)
class State:
    """Density matrix with a purity tag.

    ``pure`` and ``mixed`` states have unit trace; ``deviation`` matrices
    are traceless.
    """

    rho: np.ndarray
    kind: str = "mixed"
    _n: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}")
        rho = np.array(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density matrix must be square")
        object.__setattr__(self, "_n", n_spins_of(rho.shape[0]))
        rho.flags.writeable = False
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def n_spins(self) -> int:
        return self._n

    @classmethod
    def from_ket(cls, psi) -> State:
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), "pure")

    @classmethod
    def basis(cls, bits: str) -> State:
        """Computational basis state from a bit string such as ``"01"``."""
        psi = np.zeros(2 ** len(bits), dtype=complex)
        psi[int(bits, 2)] = 1
        return cls.from_ket(psi)

    @classmethod
    def maximally_mixed(cls, n_spins: int) -> State:
        d = 2**n_spins
        return cls(np.eye(d) / d, "mixed")

    def evolve(self, u: np.ndarray) -> State:
        kind = "mixed" if self.kind == "pure" and not is_unitary(u) else self.kind
        return State(u @ self.rho @ dagger(u), kind)

    def deviation(self) -> np.ndarray:
        """Traceless part ``rho - tr(rho)/d``."""
        return self.rho - np.trace(self.rho) / self.dim * np.eye(self.dim)

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(self.rho @ op))

    def populations(self) -> np.ndarray:
        return np.real(np.diagonal(self.rho)).copy()

    def purity(self) -> float:
        return float(np.real(np.vdot(self.rho, self.rho)))

    def check(self, atol: float = 1e-10) -> None:
        """Raise ``ValueError`` if the trace/Hermiticity/positivity invariants fail."""
        if not np.allclose(self.rho, dagger(self.rho), rtol=0, atol=atol):
            raise ValueError("state is not Hermitian")
        tr = np.trace(self.rho).real
        if self.kind == "deviation":
            if abs(tr) > atol:
                raise ValueError(f"deviation matrix has trace {tr}")
            return
        if abs(tr - 1) > atol:
            raise ValueError(f"state has trace {tr}")
        if np.linalg.eigvalsh(self.rho).min() < -atol:
            raise ValueError("state has a negative eigenvalue")
