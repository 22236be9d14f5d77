"""Execute pulse programs; compile two-qubit gates; pseudo-pure preparation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from .control import rotation_2x2, rotation_as_segment, segment_propagator
from .operators import State, dagger, expm_hermitian, spin_operator
from .parallel import ordered_map
from .program import Delay, EnsembleSpec, FrameZ, Pulse, PulseProgram, PulseSegment, RotationSpec, program
from .spins import SpinSystem, internal_hamiltonian

MODES = ("ideal_pulses", "finite_pulses")
DEFAULT_RF_HZ = 25_000.0


@dataclass
class RunResult:
    state: State | None
    unitary: np.ndarray
    times: list[float] = field(default_factory=list)
    samples: dict[str, list[complex]] = field(default_factory=dict)


def framez_diagonal(n_spins: int, spin: int, angle_rad: float) -> np.ndarray:
    """Diagonal of ``exp(-i angle I_z^spin)``."""
    return np.exp(-1j * angle_rad * np.real(np.diagonal(spin_operator(n_spins, spin, "z"))))


class _Propagators:
    """Per-run cache of event propagators (diagonal ones kept as vectors)."""

    def __init__(self, sys: SpinSystem, h_int: np.ndarray, mode: str, rf_amplitude_hz: float, rf_scale: float):
        self.sys = sys
        self.n = sys.n_spins
        self.h_int = h_int
        self.mode = mode
        self.rf = rf_amplitude_hz
        self.scale = rf_scale
        self.h_is_diag = not np.any(h_int - np.diag(np.diagonal(h_int)))
        self._delays: dict[float, np.ndarray] = {}

    def delay(self, t: float) -> np.ndarray:
        u = self._delays.get(t)
        if u is None:
            if self.h_is_diag:
                u = np.exp(-1j * np.real(np.diagonal(self.h_int)) * t)
            else:
                u = expm_hermitian(self.h_int, t)
            self._delays[t] = u
        return u

    def event(self, ev) -> np.ndarray:
        if isinstance(ev, Delay):
            return self.delay(ev.duration_s)
        if isinstance(ev, FrameZ):
            return framez_diagonal(self.n, ev.spin, ev.angle_rad)
        el = ev.element
        if isinstance(el, RotationSpec):
            eps = (1 + el.amplitude_error) * self.scale - 1
            nx, ny, _ = el.axis
            if self.mode == "ideal_pulses" or math.hypot(nx, ny) < 1e-12:
                return _LocalOps({k: rotation_2x2(el.axis, (1 + eps) * el.angle_rad) for k in el.targets})
            seg = rotation_as_segment(el, self.sys, self.rf)
        else:
            seg = el
        if self.scale != 1.0:
            seg = PulseSegment(seg.amplitude_hz * self.scale, seg.phase_rad, seg.duration_s, seg.transmitter_offset_hz, seg.targets)
        return segment_propagator(seg, self.sys, self.h_int)


class _LocalOps(dict):
    """Commuting single-spin operators, spin index -> 2x2 matrix."""

    def full(self, n_spins: int) -> np.ndarray:
        from .operators import embed

        u = np.eye(2**n_spins, dtype=complex)
        for k, op in self.items():
            u = embed(op, n_spins, k) @ u
        return u


def _apply(u_ev, u: np.ndarray) -> np.ndarray:
    if isinstance(u_ev, _LocalOps):
        d = u.shape[0]
        n = d.bit_length() - 1
        for k, op in u_ev.items():
            r = u.reshape(2 ** (k - 1), 2, 2 ** (n - k), u.shape[1])
            u = np.einsum("ij,ajbc->aibc", op, r).reshape(d, u.shape[1])
        return u
    if u_ev.ndim == 1:
        return u_ev[:, None] * u
    return u_ev @ u


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")


def program_unitary(
    prog: PulseProgram,
    sys: SpinSystem,
    mode: str = "ideal_pulses",
    rf_amplitude_hz: float = DEFAULT_RF_HZ,
    rf_scale: float = 1.0,
    b0_offset_hz: float = 0.0,
) -> np.ndarray:
    """Ordered product of the per-event propagators."""
    _check_mode(mode)
    sys = sys.shifted(b0_offset_hz)
    props = _Propagators(sys, internal_hamiltonian(sys), mode, rf_amplitude_hz, rf_scale)
    u = np.eye(sys.dim, dtype=complex)
    for ev in prog:
        u = _apply(props.event(ev), u)
    return u


def run_program(
    prog: PulseProgram,
    sys: SpinSystem,
    rho0: State | None = None,
    mode: str = "ideal_pulses",
    rf_amplitude_hz: float = DEFAULT_RF_HZ,
    rf_scale: float = 1.0,
    b0_offset_hz: float = 0.0,
    observables: Mapping[str, np.ndarray] | None = None,
    sample_dt: float | None = None,
) -> RunResult:
    """Run ``prog`` on ``sys`` starting from ``rho0``.

    ``ideal_pulses`` applies :class:`RotationSpec` pulses instantaneously;
    ``finite_pulses`` turns them into on-resonance segments of
    ``rf_amplitude_hz`` evolving under ``H_int + H_rf``. ``rf_scale`` and
    ``b0_offset_hz`` perturb the run (one ensemble member). With
    ``observables``, expectation values are sampled at t=0, after every
    event and every ``sample_dt`` inside delays.
    """
    _check_mode(mode)
    if rho0 is not None and rho0.dim != sys.dim:
        raise ValueError(f"state dimension {rho0.dim} does not match system dimension {sys.dim}")
    shifted = sys.shifted(b0_offset_hz)
    props = _Propagators(shifted, internal_hamiltonian(shifted), mode, rf_amplitude_hz, rf_scale)
    u = np.eye(sys.dim, dtype=complex)
    result = RunResult(None, u)
    if observables and rho0 is None:
        raise ValueError("sampling observables needs an initial state")

    def sample(t: float, u: np.ndarray) -> None:
        rho = u @ rho0.rho @ dagger(u)
        result.times.append(t)
        for name, op in observables.items():
            result.samples.setdefault(name, []).append(complex(np.trace(rho @ op)))

    t = 0.0
    if observables:
        sample(0.0, u)
    for ev in prog:
        if observables and sample_dt and isinstance(ev, Delay) and ev.duration_s > sample_dt:
            n_sub = int(math.floor(ev.duration_s / sample_dt + 1e-9))
            step = props.delay(sample_dt)
            u_sub = u
            for k in range(1, n_sub + 1):
                if k * sample_dt >= ev.duration_s - 1e-15:
                    break
                u_sub = _apply(step, u_sub)
                sample(t + k * sample_dt, u_sub)
        u = _apply(props.event(ev), u)
        t += ev.duration_s
        if observables:
            sample(t, u)
    result.unitary = u
    if rho0 is not None:
        result.state = rho0.evolve(u)
    return result


def run_ensemble(
    prog: PulseProgram,
    sys: SpinSystem,
    rho0: State,
    ens: EnsembleSpec,
    mode: str = "ideal_pulses",
    rf_amplitude_hz: float = DEFAULT_RF_HZ,
    threads: int | None = None,
) -> State:
    """Weighted average of the program output over ensemble members.

    Each member scales every RF amplitude by ``rf_scale`` and shifts every
    resonance offset by ``b0_offset_hz``. Members may run in parallel; the
    sum is taken in member order.
    """
    if not len(ens):
        raise ValueError("empty ensemble")
    if rho0.dim != sys.dim:
        raise ValueError("state dimension does not match system")

    def one(m):
        u = program_unitary(prog, sys, mode, rf_amplitude_hz, m.rf_scale, m.b0_offset_hz)
        return u @ rho0.rho @ dagger(u)

    rhos = ordered_map(one, ens.members, threads)
    acc = np.zeros_like(rho0.rho)
    for m, rho in zip(ens.members, rhos):
        acc = acc + m.weight * rho
    kind = "deviation" if rho0.kind == "deviation" else "mixed"
    return State((acc + dagger(acc)) / 2, kind)


# Two-qubit gate compilation -------------------------------------------------


def walsh_signs(index: int, n_bits: int) -> list[int]:
    """Walsh function ``index`` sampled on ``2**n_bits`` equal segments."""
    return [(-1) ** bin(index & s).count("1") for s in range(2**n_bits)]


def _pi_x(spin: int) -> Pulse:
    return Pulse(RotationSpec.xy(0.0, math.pi, spin))


def zz_block(i: int, j: int, sys: SpinSystem, phase_rad: float, refocus: bool = True) -> PulseProgram:
    """Program realizing ``exp(-i phase I_z^i I_z^j)`` (up to global phase).

    Free evolution under the ``i-j`` coupling for the required time; spin
    ``i`` and ``j`` offsets are undone with frame rotations; every other spin
    follows its own Walsh flip pattern of pi pulses so that its offset and
    couplings average to zero. Exact for ``weak_j`` systems with ideal
    pulses.
    """
    if sys.coupling_model != "weak_j":
        raise ValueError("zz_block requires a weak_j system")
    i, j = sys.index(i), sys.index(j)
    if i == j:
        raise ValueError("zz_block needs two distinct spins")
    jc = sys.j_hz[i - 1, j - 1]
    if jc == 0:
        raise ValueError(f"spins {i} and {j} are not coupled")
    period = 2.0 / abs(jc)  # exp(-i 2 pi J t IzIz) repeats up to a global phase
    t = (phase_rad / (2 * math.pi * jc)) % period
    events: list = []
    if t > 0:
        spectators = [k for k in range(1, sys.n_spins + 1) if k not in (i, j)] if refocus else []
        n_bits = math.ceil(math.log2(len(spectators) + 1)) if spectators else 0
        patterns = {k: walsh_signs(w, n_bits) for w, k in enumerate(spectators, start=1)}
        n_seg = 2**n_bits
        prev = {k: 1 for k in spectators}
        for s in range(n_seg):
            for k in spectators:
                if patterns[k][s] != prev[k]:
                    events.append(_pi_x(k))
                    prev[k] = patterns[k][s]
            events.append(Delay(t / n_seg))
        for k in spectators:
            if prev[k] != 1:
                events.append(_pi_x(k))
        for k in (i, j):
            nu = sys.offsets_hz[k - 1]
            if nu:
                events.append(FrameZ(k, -2 * math.pi * nu * t))
    return PulseProgram(tuple(events))


def compile_cz(i: int, j: int, sys: SpinSystem, refocus: bool = True) -> PulseProgram:
    """Controlled-Z, ``diag(1, 1, 1, -1)`` on ``(i, j)``, up to global phase."""
    return compile_cphase(i, j, sys, math.pi, refocus)


def compile_cphase(i: int, j: int, sys: SpinSystem, phi: float, refocus: bool = True) -> PulseProgram:
    """``exp(i phi |11><11|)`` on spins ``(i, j)`` up to global phase.

    ``|11><11| = 1/4 - I_z^i/2 - I_z^j/2 + I_z^i I_z^j``.
    """
    i, j = sys.index(i), sys.index(j)
    return program(
        zz_block(i, j, sys, -phi, refocus),
        FrameZ(i, phi / 2),
        FrameZ(j, phi / 2),
    )


def compile_cnot(control: int, target: int, sys: SpinSystem, refocus: bool = True) -> PulseProgram:
    """CNOT from target ``R_y(+90)``, a controlled-Z and target ``R_y(-90)``.

    The coupling evolution runs for ``1/(2|J|)``; all z rotations (offset
    compensation, the controlled-Z corrections, a final control Z) are
    frame changes.
    """
    c, t = sys.index(control), sys.index(target)
    if c == t:
        raise ValueError("control and target must differ")
    if sys.j_hz[c - 1, t - 1] == 0:
        raise ValueError(f"spins {c} and {t} have zero coupling")
    return program(
        Pulse(RotationSpec.xy(math.pi / 2, math.pi / 2, t)),
        compile_cz(c, t, sys, refocus),
        Pulse(RotationSpec.xy(math.pi / 2, -math.pi / 2, t)),
        FrameZ(c, math.pi),  # the conjugated CZ is controlled(-X); a control Z fixes the sign
    )


def cnot_matrix(n_spins: int, control: int, target: int) -> np.ndarray:
    d = 2**n_spins
    out = np.zeros((d, d))
    cb, tb = n_spins - control, n_spins - target
    for s in range(d):
        out[s ^ (1 << tb) if (s >> cb) & 1 else s, s] = 1
    return out


# Pseudo-pure preparation by temporal averaging ------------------------------


@lru_cache(maxsize=None)
def _cyclic_cnot_word(n_spins: int) -> tuple[tuple[int, int], ...]:
    """Shortest CNOT word whose GF(2)-linear action cycles all nonzero states."""
    d = 2**n_spins
    gens = [(c, t) for c in range(1, n_spins + 1) for t in range(1, n_spins + 1) if c != t]

    def apply(perm, gate):
        c, t = gate
        cb, tb = n_spins - c, n_spins - t
        return tuple(p ^ (1 << tb) if (p >> cb) & 1 else p for p in perm)

    def is_full_cycle(perm):
        seen, s = 1, perm[1]
        while s != 1:
            s = perm[s]
            seen += 1
        return seen == d - 1

    frontier = [((), tuple(range(d)))]
    seen = {tuple(range(d))}
    while frontier:
        nxt = []
        for word, perm in frontier:
            for g in gens:
                p = apply(perm, g)
                if p in seen:
                    continue
                w = word + (g,)
                if is_full_cycle(p):
                    return w
                seen.add(p)
                nxt.append((w, p))
        frontier = nxt
    raise RuntimeError("no cyclic CNOT word found")


def permutation_programs(sys: SpinSystem, refocus: bool = True) -> list[PulseProgram]:
    """Programs ``P^0 .. P^(d-2)`` of a CNOT network ``P`` cycling the
    ``d - 1`` non-ground basis states."""
    n = sys.n_spins
    word = _cyclic_cnot_word(n)
    step = program(*[compile_cnot(c, t, sys, refocus) for c, t in word])
    return [program(*([step] * k)) for k in range(2**n - 1)]


def pseudo_pure_temporal(sys: SpinSystem, rho_thermal: State) -> tuple[list[PulseProgram], State]:
    """Temporal averaging into ``alpha |0..0><0..0| + (1 - alpha) 1/2^N``.

    Supports 2 or 3 spins (3 and 7 programs respectively).
    """
    n = sys.n_spins
    if not 2 <= n <= 3:
        raise ValueError("temporal averaging is implemented for 2 or 3 spins only")
    if rho_thermal.dim != sys.dim:
        raise ValueError("state dimension does not match system")
    progs = permutation_programs(sys)
    acc = np.zeros_like(rho_thermal.rho)
    for p in progs:
        u = program_unitary(p, sys)
        acc = acc + u @ rho_thermal.rho @ dagger(u)
    acc = acc / len(progs)
    return progs, State((acc + dagger(acc)) / 2, rho_thermal.kind)


def pseudo_pure_alpha(rho: State) -> float:
    """``alpha`` of a pseudo-pure state on ``|0..0>`` (from the ground population)."""
    d = rho.dim
    return float((rho.rho[0, 0].real - 1 / d) / (1 - 1 / d))
