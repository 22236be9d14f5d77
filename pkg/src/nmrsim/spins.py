"""Spin systems, internal Hamiltonians and thermal equilibrium states."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.constants as const

from .operators import MAX_SPINS, State, spin_operator

COUPLING_MODELS = ("full_j", "weak_j", "dipolar_truncated")
PROTON_GAMMA_HZ_PER_T = 42.577478e6


def _coupling_matrix(m, n: int, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (n, n):
        raise ValueError(f"{name} must be {n}x{n}, got {m.shape}")
    if not np.allclose(m, m.T, rtol=0, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if np.any(np.diagonal(m) != 0):
        raise ValueError(f"{name} must have a zero diagonal")
    m = m.copy()
    m.flags.writeable = False
    return m


@dataclass(frozen=True, eq=False)
class SpinSystem:
    """N spin-1/2 nuclei in the rotating frame.

    ``offsets_hz`` are rotating-frame resonance offsets, ``j_hz`` the scalar
    couplings and ``d_hz`` the (optional) dipolar couplings, all in Hz.
    ``gamma_hz_per_tesla`` is only used to build thermal states.
    """

    offsets_hz: tuple[float, ...]
    j_hz: np.ndarray | None = None
    labels: tuple[str, ...] = ()
    d_hz: np.ndarray | None = None
    coupling_model: str = "weak_j"
    gamma_hz_per_tesla: tuple[float, ...] = ()
    name: str = field(default="", compare=False)

    def __post_init__(self):
        offsets = tuple(float(v) for v in self.offsets_hz)
        n = len(offsets)
        if not 1 <= n <= MAX_SPINS:
            raise ValueError(f"need 1..{MAX_SPINS} spins, got {n}")
        object.__setattr__(self, "offsets_hz", offsets)
        j = np.zeros((n, n)) if self.j_hz is None else self.j_hz
        object.__setattr__(self, "j_hz", _coupling_matrix(j, n, "j_hz"))
        if self.d_hz is not None:
            object.__setattr__(self, "d_hz", _coupling_matrix(self.d_hz, n, "d_hz"))
        labels = tuple(self.labels) or tuple(f"S{k}" for k in range(1, n + 1))
        if len(labels) != n:
            raise ValueError("one label per spin required")
        object.__setattr__(self, "labels", labels)
        if self.coupling_model not in COUPLING_MODELS:
            raise ValueError(f"coupling_model must be one of {COUPLING_MODELS}")
        if self.coupling_model == "dipolar_truncated" and self.d_hz is None:
            raise ValueError("dipolar_truncated model requires d_hz")
        gammas = tuple(float(g) for g in self.gamma_hz_per_tesla)
        if gammas and len(gammas) != n:
            raise ValueError("one gyromagnetic ratio per spin required")
        object.__setattr__(self, "gamma_hz_per_tesla", gammas)

    @property
    def n_spins(self) -> int:
        return len(self.offsets_hz)

    @property
    def dim(self) -> int:
        return 2**self.n_spins

    def index(self, spin) -> int:
        """Resolve a 1-based index or a label to a 1-based index."""
        if isinstance(spin, str):
            try:
                return self.labels.index(spin) + 1
            except ValueError:
                raise ValueError(f"no spin labelled {spin!r}") from None
        spin = int(spin)
        if not 1 <= spin <= self.n_spins:
            raise ValueError(f"spin index {spin} out of range 1..{self.n_spins}")
        return spin

    def shifted(self, b0_offset_hz: float) -> SpinSystem:
        """Copy with every resonance offset moved by ``b0_offset_hz``."""
        if b0_offset_hz == 0:
            return self
        return replace(self, offsets_hz=tuple(v + b0_offset_hz for v in self.offsets_hz))

    def to_dict(self) -> dict:
        spins = []
        for k, (label, off) in enumerate(zip(self.labels, self.offsets_hz)):
            entry = {"label": label, "offset_hz": off}
            if self.gamma_hz_per_tesla:
                entry["gamma_hz_per_tesla"] = self.gamma_hz_per_tesla[k]
            spins.append(entry)
        out = {"spins": spins, "j_hz": self.j_hz.tolist(), "model": self.coupling_model}
        if self.d_hz is not None:
            out["d_hz"] = self.d_hz.tolist()
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_dict(cls, data: dict) -> SpinSystem:
        allowed = {"spins", "j_hz", "d_hz", "model", "name"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown spin-system keys: {sorted(unknown)}")
        spins = data["spins"]
        gammas = [s["gamma_hz_per_tesla"] for s in spins if "gamma_hz_per_tesla" in s]
        return cls(
            offsets_hz=tuple(s["offset_hz"] for s in spins),
            labels=tuple(s.get("label", f"S{k + 1}") for k, s in enumerate(spins)),
            j_hz=data.get("j_hz"),
            d_hz=data.get("d_hz"),
            coupling_model=data.get("model", "weak_j"),
            gamma_hz_per_tesla=tuple(gammas) if len(gammas) == len(spins) else (),
            name=data.get("name", ""),
        )

    @classmethod
    def from_json(cls, path) -> SpinSystem:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class ThermalParams:
    b0_tesla: float
    temperature_k: float
    gamma_hz_per_tesla: tuple[float, ...]

    def __post_init__(self):
        if not self.b0_tesla > 0:
            raise ValueError("b0_tesla must be positive")
        if not self.temperature_k > 0:
            raise ValueError("temperature_k must be positive")
        object.__setattr__(self, "gamma_hz_per_tesla", tuple(float(g) for g in self.gamma_hz_per_tesla))

    @classmethod
    def for_system(cls, sys: SpinSystem, b0_tesla: float = 11.74, temperature_k: float = 300.0) -> ThermalParams:
        gammas = sys.gamma_hz_per_tesla or (PROTON_GAMMA_HZ_PER_T,) * sys.n_spins
        return cls(b0_tesla, temperature_k, gammas)

    def larmor_hz(self) -> np.ndarray:
        return np.asarray(self.gamma_hz_per_tesla) * self.b0_tesla

    def polarization(self) -> np.ndarray:
        """Exact single-spin polarizations ``tanh(h nu / 2 k T)``."""
        return np.tanh(const.h * self.larmor_hz() / (2 * const.k * self.temperature_k))


def coupling_term(sys: SpinSystem) -> np.ndarray:
    """Spin-spin part of the internal Hamiltonian (rad/s)."""
    n = sys.n_spins
    h = np.zeros((sys.dim, sys.dim), dtype=complex)
    op = lambda k, a: spin_operator(n, k, a)  # noqa: E731
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if sys.coupling_model == "dipolar_truncated":
                d = sys.d_hz[i - 1, j - 1]
                if d:
                    zz = op(i, "z") @ op(j, "z")
                    dot = op(i, "x") @ op(j, "x") + op(i, "y") @ op(j, "y") + zz
                    h += 2 * np.pi * d * (3 * zz - dot)
                continue
            jc = sys.j_hz[i - 1, j - 1]
            if not jc:
                continue
            zz = op(i, "z") @ op(j, "z")
            if sys.coupling_model == "weak_j":
                h += 2 * np.pi * jc * zz
            else:
                h += 2 * np.pi * jc * (zz + op(i, "x") @ op(j, "x") + op(i, "y") @ op(j, "y"))
    return h


def internal_hamiltonian(sys: SpinSystem) -> np.ndarray:
    """Rotating-frame internal Hamiltonian in rad/s.

    ``full_j`` keeps the isotropic ``I.I`` coupling, ``weak_j`` only its
    ``I_z I_z`` part, and ``dipolar_truncated`` is the secular homonuclear
    dipolar form with one shared Zeeman offset.
    """
    n = sys.n_spins
    if sys.coupling_model == "dipolar_truncated":
        if len(set(sys.offsets_hz)) > 1:
            raise ValueError("dipolar_truncated model needs one shared offset for all spins")
        zeeman = 2 * np.pi * sys.offsets_hz[0] * sum(spin_operator(n, k, "z") for k in range(1, n + 1))
    else:
        zeeman = sum(2 * np.pi * nu * spin_operator(n, k, "z") for k, nu in enumerate(sys.offsets_hz, start=1))
    return np.asarray(zeeman, dtype=complex) + coupling_term(sys)


def x_basis_dipolar(sys: SpinSystem, representation: str = "lab") -> np.ndarray:
    """Truncated dipolar coupling written with x-quantized ladder operators.

    Uses ``I_x`` and ``I_x+- = I_y +- i I_z``, which splits the coupling into
    zero- and double-quantum parts about the x axis. With
    ``representation="lab"`` the operators are the ordinary lab-frame
    matrices (so the result equals the z-form coupling term). With
    ``"x_eigenbasis"`` they are expressed in the frame whose ``I_z``
    eigenbasis is the ``I_x`` eigenbasis, i.e. ``I_x -> I_z``,
    ``I_x+ -> -i I_+`` and ``I_x- -> i I_-``; that matrix equals the
    coupling term conjugated by ``exp(-i pi/2 sum I_y)``.
    """
    if sys.d_hz is None:
        raise ValueError("x_basis_dipolar needs dipolar couplings (d_hz)")
    n = sys.n_spins
    if representation == "lab":
        ix = lambda k: spin_operator(n, k, "x")  # noqa: E731
        up = lambda k: spin_operator(n, k, "y") + 1j * spin_operator(n, k, "z")  # noqa: E731
        dn = lambda k: spin_operator(n, k, "y") - 1j * spin_operator(n, k, "z")  # noqa: E731
    elif representation == "x_eigenbasis":
        ix = lambda k: spin_operator(n, k, "z")  # noqa: E731
        up = lambda k: -1j * spin_operator(n, k, "+")  # noqa: E731
        dn = lambda k: 1j * spin_operator(n, k, "-")  # noqa: E731
    else:
        raise ValueError("representation must be 'lab' or 'x_eigenbasis'")
    h = np.zeros((sys.dim, sys.dim), dtype=complex)
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            d = 2 * np.pi * sys.d_hz[i - 1, j - 1]
            if not d:
                continue
            zero_q = 2 * ix(i) @ ix(j) - 0.5 * (up(i) @ dn(j) + dn(i) @ up(j))
            double_q = up(i) @ up(j) + dn(i) @ dn(j)
            h += -0.5 * d * zero_q - 0.75 * d * double_q
    return h


def thermal_state(sys: SpinSystem, tp: ThermalParams, mode: str = "high_temperature") -> State:
    """Boltzmann equilibrium of the Zeeman Hamiltonian at ``tp``.

    ``exact`` exponentiates the lab-frame Zeeman energies; ``high_temperature``
    keeps the first-order term ``(1 + sum_k h nu_k I_z^k / k_B T) / 2^N``.
    Couplings are negligible at this energy scale and ignored.
    """
    if len(tp.gamma_hz_per_tesla) != sys.n_spins:
        raise ValueError("ThermalParams needs one gyromagnetic ratio per spin")
    n = sys.n_spins
    beta_nu = const.h * tp.larmor_hz() / (const.k * tp.temperature_k)
    if mode == "exact":
        idx = np.arange(sys.dim)
        bits = (idx[:, None] >> np.arange(n - 1, -1, -1)) & 1
        m = 0.5 - bits
        # spin-up (m = +1/2) is the low-energy state for positive gamma
        log_w = m @ beta_nu
        w = np.exp(log_w - log_w.max())
        return State(np.diag(w / w.sum()), "mixed")
    if mode == "high_temperature":
        d = sys.dim
        rho = np.eye(d, dtype=complex) / d
        for k in range(1, n + 1):
            rho = rho + beta_nu[k - 1] / d * spin_operator(n, k, "z")
        return State(rho, "mixed")
    raise ValueError("mode must be 'exact' or 'high_temperature'")


def deviation_state(sys: SpinSystem, weights=None) -> State:
    """Traceless ``sum_k w_k I_z^k`` (unit weights by default)."""
    n = sys.n_spins
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    rho = sum(w[k - 1] * spin_operator(n, k, "z") for k in range(1, n + 1))
    return State(rho, "deviation")


PRESETS = ("two_spin", "three_spin", "five_spin", "seven_spin")


def load_preset(name: str) -> SpinSystem:
    """Bundled example molecule by name (see ``PRESETS``)."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("nmrsim.data").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return SpinSystem.from_dict(json.loads(text))


def dipolar_chain(n_spins: int, d_nn_hz: float = 1000.0, offset_hz: float = 0.0) -> SpinSystem:
    """Linear chain with all-pairs couplings falling off as ``1/r^3``."""
    idx = np.arange(n_spins)
    r = np.abs(idx[:, None] - idx[None, :]).astype(float)
    with np.errstate(divide="ignore"):
        d = np.where(r > 0, d_nn_hz / r**3, 0.0)
    return SpinSystem(
        offsets_hz=(offset_hz,) * n_spins,
        d_hz=d,
        coupling_model="dipolar_truncated",
        labels=tuple(f"F{k}" for k in range(1, n_spins + 1)),
        name=f"dipolar_chain_{n_spins}",
    )
