"""RF control: rotations, composite pulses, finite segments, toggling frames
and strongly-modulating pulse search."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.optimize

from .operators import avg_gate_fidelity, dagger, expm_hermitian, kron, n_spins_of, spin_operator
from .program import (
    CompositeSequence,
    Delay,
    EnsembleSpec,
    Pulse,
    PulseProgram,
    PulseSegment,
    RotationSpec,
)
from .spins import SpinSystem, internal_hamiltonian
from .parallel import thread_count


def rotation_generator(r: RotationSpec, n_spins: int) -> np.ndarray:
    nx, ny, nz = r.axis
    g = np.zeros((2**n_spins,) * 2, dtype=complex)
    for k in r.targets:
        g += nx * spin_operator(n_spins, k, "x") + ny * spin_operator(n_spins, k, "y") + nz * spin_operator(n_spins, k, "z")
    return g


def _cos_sin(x: float) -> tuple[float, float]:
    """cos and sin, exact at multiples of pi/2 (so pi pulses carry no round-off)."""
    q = x / (math.pi / 2)
    m = round(q)
    if abs(q - m) < 1e-13:
        return ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[m % 4]
    return math.cos(x), math.sin(x)


def rotation_2x2(axis, angle_rad: float) -> np.ndarray:
    """``exp(-i angle n.sigma/2)`` for a single spin."""
    nx, ny, nz = axis
    c, s = _cos_sin(angle_rad / 2)
    return np.array([[c - 1j * s * nz, -1j * s * nx - s * ny], [-1j * s * nx + s * ny, c + 1j * s * nz]])


def rotation_propagator(r: RotationSpec, n_spins: int) -> np.ndarray:
    """``exp[-i (1 + eps) theta n.I]`` on the target spin(s)."""
    for k in r.targets:
        if not 1 <= k <= n_spins:
            raise ValueError(f"spin index {k} out of range 1..{n_spins}")
    local = rotation_2x2(r.axis, (1 + r.amplitude_error) * r.angle_rad)
    factors = [local if k in r.targets else np.eye(2) for k in range(1, n_spins + 1)]
    return kron(*factors).astype(complex)


def sequence_propagator(seq: Sequence[RotationSpec], n_spins: int, eps: float | None = None) -> np.ndarray:
    """Product of the rotations, first element acting first.

    ``eps`` overrides every element's amplitude error.
    """
    u = np.eye(2**n_spins, dtype=complex)
    for r in seq:
        if eps is not None:
            r = r.with_error(eps)
        u = rotation_propagator(r, n_spins) @ u
    return u


def bb1(theta_rad: float, spin=1, phase_rad: float = 0.0) -> CompositeSequence:
    """Wimperis BB1 replacement for a rotation ``theta`` about x.

    Returned in application order: ``R_0(theta)``, then ``R_phi(pi)``,
    ``R_3phi(2 pi)``, ``R_phi(pi)`` with ``phi = arccos(-theta / 4 pi)``.
    """
    if not 0 < theta_rad <= 2 * math.pi:
        raise ValueError("BB1 needs 0 < theta <= 2 pi")
    phi = math.acos(-theta_rad / (4 * math.pi))
    return (
        RotationSpec.xy(phase_rad, theta_rad, spin),
        RotationSpec.xy(phase_rad + phi, math.pi, spin),
        RotationSpec.xy(phase_rad + 3 * phi, 2 * math.pi, spin),
        RotationSpec.xy(phase_rad + phi, math.pi, spin),
    )


def rf_hamiltonian(seg: PulseSegment, n_spins: int) -> np.ndarray:
    """RF term of a segment, transmitter offset folded in as ``-2 pi off I_z``."""
    targets = seg.targets or tuple(range(1, n_spins + 1))
    w1 = 2 * np.pi * seg.amplitude_hz
    c, s = math.cos(seg.phase_rad), math.sin(seg.phase_rad)
    h = np.zeros((2**n_spins,) * 2, dtype=complex)
    for k in targets:
        if not 1 <= k <= n_spins:
            raise ValueError(f"segment target {k} out of range 1..{n_spins}")
        h += w1 * (c * spin_operator(n_spins, k, "x") + s * spin_operator(n_spins, k, "y"))
        if seg.transmitter_offset_hz:
            h -= 2 * np.pi * seg.transmitter_offset_hz * spin_operator(n_spins, k, "z")
    return h


def segment_propagator(seg: PulseSegment, sys: SpinSystem, h_int: np.ndarray | None = None) -> np.ndarray:
    """``exp[-i (H_int + H_rf) duration]`` for one constant segment."""
    if h_int is None:
        h_int = internal_hamiltonian(sys)
    return expm_hermitian(h_int + rf_hamiltonian(seg, sys.n_spins), seg.duration_s)


def rotation_as_segment(r: RotationSpec, sys: SpinSystem, amplitude_hz: float) -> PulseSegment:
    """Finite pulse realizing ``r`` on resonance with its (first) target spin.

    A z component of the axis is produced by detuning the transmitter, so
    the effective nutation axis matches ``r.axis``.
    """
    nx, ny, nz = r.axis
    nxy = math.hypot(nx, ny)
    if nxy < 1e-12:
        raise ValueError("pure z rotations are frame changes, not RF pulses")
    angle = (1 + r.amplitude_error) * r.angle_rad
    phase = math.atan2(ny, nx)
    if angle < 0:
        angle, phase = -angle, phase + math.pi
        nz = -nz
    detuning = amplitude_hz * nz / nxy
    nutation = math.hypot(amplitude_hz, detuning)
    targets = r.targets
    # offsets of all targets are shifted by the same transmitter setting, so
    # multi-spin pulses are on resonance with the first target only
    nu = sys.offsets_hz[targets[0] - 1]
    return PulseSegment(
        amplitude_hz=amplitude_hz,
        phase_rad=phase,
        duration_s=angle / (2 * math.pi * nutation),
        transmitter_offset_hz=nu - detuning,
        targets=targets,
    )


@dataclass(frozen=True)
class TogglingFrame:
    hamiltonians: tuple[np.ndarray, ...]
    propagator: np.ndarray
    average: np.ndarray


def _as_unitary(p, n_spins: int) -> np.ndarray:
    if isinstance(p, RotationSpec):
        return rotation_propagator(p, n_spins)
    return np.asarray(p, dtype=complex)


def toggling_frame(h_int: np.ndarray, pulses: Sequence, delta_t_s: float, cyclic_atol: float = 1e-8) -> TogglingFrame:
    """Toggling-frame view of the train ``[dt, P1, dt, P2, ..., dt, PM]``.

    ``pulses`` holds unitaries or :class:`RotationSpec` objects (instantaneous).
    Returns ``H_k = U_{k-1}^dag H U_{k-1}`` with ``U_k = P_k ... P_1``,
    the exact total propagator and the zeroth-order average Hamiltonian.
    An empty train is a single free interval.
    """
    h_int = np.asarray(h_int, dtype=complex)
    n = n_spins_of(h_int.shape[0])
    if not pulses:
        return TogglingFrame((h_int,), expm_hermitian(h_int, delta_t_s), h_int.copy())
    us = [_as_unitary(p, n) for p in pulses]
    frame = np.eye(h_int.shape[0], dtype=complex)
    hams = []
    total = np.eye(h_int.shape[0], dtype=complex)
    for p in us:
        hk = dagger(frame) @ h_int @ frame
        hk = (hk + dagger(hk)) / 2
        hams.append(hk)
        total = expm_hermitian(hk, delta_t_s) @ total
        frame = p @ frame
    d = h_int.shape[0]
    if abs(abs(np.trace(frame)) / d - 1) > cyclic_atol:
        raise ValueError("pulse train is not cyclic (product of pulses is not the identity)")
    total = frame @ total  # a global phase for a cyclic train
    return TogglingFrame(tuple(hams), total, sum(hams) / len(hams))


def carr_purcell(tau_s: float, n_echoes: int, spin=1, phase_rad: float = 0.0) -> PulseProgram:
    """``tau, pi, 2 tau, pi, ..., pi, tau`` with ``n_echoes`` ideal pi pulses."""
    if n_echoes < 1:
        raise ValueError("Carr-Purcell train needs n_echoes >= 1")
    if not tau_s > 0:
        raise ValueError("tau must be positive")
    pi_pulse = Pulse(RotationSpec.xy(phase_rad, math.pi, spin))
    events = [Delay(tau_s), pi_pulse]
    for _ in range(n_echoes - 1):
        events += [Delay(2 * tau_s), pi_pulse]
    events.append(Delay(tau_s))
    return PulseProgram(tuple(events))


def carr_purcell_pulses(n_echoes: int, spin=1, phase_rad: float = 0.0) -> list[RotationSpec]:
    """The CP train as equally spaced instants for :func:`toggling_frame`
    (pi pulses interleaved with identities)."""
    pi = RotationSpec.xy(phase_rad, math.pi, spin)
    ident = RotationSpec.xy(phase_rad, 0.0, spin)
    return [pi, ident] * n_echoes


# Shaped pulses ---------------------------------------------------------------


def _shaped(envelope: np.ndarray, duration_s: float, flip_angle_rad: float, phase_rad: float, targets, offset_hz: float):
    dt = duration_s / len(envelope)
    area = float(np.sum(envelope)) * dt
    if area == 0:
        raise ValueError("shape has zero area")
    scale = flip_angle_rad / (2 * math.pi * area)
    segs = []
    for a in envelope * scale:
        phase = phase_rad + (math.pi if a < 0 else 0.0)
        segs.append(PulseSegment(abs(float(a)), phase, dt, offset_hz, targets))
    return segs


def rectangular_shape(duration_s: float, n_segments: int, flip_angle_rad: float, phase_rad: float = 0.0, targets=None, offset_hz: float = 0.0):
    return _shaped(np.ones(n_segments), duration_s, flip_angle_rad, phase_rad, targets, offset_hz)


def gaussian_shape(duration_s: float, n_segments: int, flip_angle_rad: float, phase_rad: float = 0.0, targets=None, offset_hz: float = 0.0, truncation: float = 2.5):
    """Gaussian envelope truncated at +-``truncation`` standard deviations."""
    x = np.linspace(-truncation, truncation, n_segments)
    return _shaped(np.exp(-0.5 * x**2), duration_s, flip_angle_rad, phase_rad, targets, offset_hz)


def hermite_gaussian_shape(duration_s: float, n_segments: int, flip_angle_rad: float, phase_rad: float = 0.0, targets=None, offset_hz: float = 0.0, coefficient: float = 0.956, truncation: float = 2.5):
    """``(1 - coefficient x^2) exp(-x^2)`` envelope on ``x`` in +-``truncation``."""
    x = np.linspace(-truncation, truncation, n_segments)
    return _shaped((1 - coefficient * x**2) * np.exp(-(x**2)), duration_s, flip_angle_rad, phase_rad, targets, offset_hz)


def segments_propagator(segments: Sequence[PulseSegment], sys: SpinSystem, h_int: np.ndarray | None = None) -> np.ndarray:
    if h_int is None:
        h_int = internal_hamiltonian(sys)
    u = np.eye(sys.dim, dtype=complex)
    for seg in segments:
        u = segment_propagator(seg, sys, h_int) @ u
    return u


def save_segments(segments: Sequence[PulseSegment], path, **meta) -> None:
    doc = dict(meta)
    doc["segments"] = [s.to_dict() for s in segments]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_segments(path) -> list[PulseSegment]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [PulseSegment.from_dict(s) for s in doc["segments"]]


# Strongly-modulating pulse search -------------------------------------------


@dataclass(frozen=True)
class OptimizedPulse:
    segments: tuple[PulseSegment, ...]
    fidelity: float
    restart_fidelities: tuple[float, ...]
    n_evaluations: int


class _Objective:
    def __init__(self, target, sys, ensemble, cap, n_segments, targets):
        self.target = np.asarray(target, dtype=complex)
        self.cap = float(cap)
        self.n_segments = n_segments
        self.targets = targets
        self.t_scale = 1.0 / (4.0 * self.cap)
        self.ops = []
        for m in ensemble.members:
            shifted = sys.shifted(m.b0_offset_hz)
            self.ops.append((m.weight, m.rf_scale, internal_hamiltonian(shifted)))
        n = sys.n_spins
        tgt = targets or tuple(range(1, n + 1))
        self.ix = sum(spin_operator(n, k, "x") for k in tgt)
        self.iy = sum(spin_operator(n, k, "y") for k in tgt)
        self.iz = sum(spin_operator(n, k, "z") for k in tgt)
        self.n_evals = 0

    def decode(self, x) -> list[PulseSegment]:
        segs = []
        for a, ph, off, dur in np.reshape(x, (self.n_segments, 4)):
            segs.append(
                PulseSegment(
                    amplitude_hz=self.cap * math.sin(a) ** 2,
                    phase_rad=float(ph) % (2 * math.pi),
                    duration_s=self.t_scale * (abs(float(dur)) + 1e-6),
                    transmitter_offset_hz=self.cap * float(off),
                    targets=self.targets,
                )
            )
        return segs

    def fidelity(self, x) -> float:
        segs = self.decode(x)
        total = 0.0
        for weight, scale, h_int in self.ops:
            u = np.eye(h_int.shape[0], dtype=complex)
            for s in segs:
                w1 = 2 * np.pi * s.amplitude_hz * scale
                h = h_int + w1 * (math.cos(s.phase_rad) * self.ix + math.sin(s.phase_rad) * self.iy)
                h = h - 2 * np.pi * s.transmitter_offset_hz * self.iz
                u = expm_hermitian(h, s.duration_s) @ u
            total += weight * avg_gate_fidelity(self.target, u)
        return total

    def __call__(self, x) -> float:
        self.n_evals += 1
        return 1.0 - self.fidelity(x)


def smp_optimize(
    target: np.ndarray,
    sys: SpinSystem,
    ensemble: EnsembleSpec | None = None,
    max_amplitude_hz: float = 5000.0,
    n_segments: int = 4,
    seed: int = 0,
    restarts: int = 8,
    max_evaluations: int = 5000,
    targets=None,
    tolerance: float = 1e-6,
    threads: int | None = None,
) -> OptimizedPulse:
    """Search piecewise-constant pulses maximizing ensemble gate fidelity.

    Each restart runs Nelder-Mead over (amplitude, phase, offset, duration)
    per segment from a seeded random start and is reseeded from its own
    best point until ``max_evaluations`` is spent. Amplitudes are bounded by
    ``max_amplitude_hz`` through a ``sin^2`` map. Deterministic for a given
    ``seed``.
    """
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    ensemble = ensemble or EnsembleSpec.single()
    seeds = np.random.SeedSequence(seed).spawn(restarts)

    def run(ss: np.random.SeedSequence):
        rng = np.random.default_rng(ss)
        obj = _Objective(target, sys, ensemble, max_amplitude_hz, n_segments, targets)
        x0 = np.column_stack(
            [
                rng.uniform(0.3, math.pi / 2, n_segments),
                rng.uniform(0, 2 * math.pi, n_segments),
                rng.uniform(-0.5, 0.5, n_segments),
                rng.uniform(0.2, 2.0, n_segments),
            ]
        ).ravel()
        best_x, best_f = x0, obj(x0)
        while obj.n_evals < max_evaluations and 1 - best_f < 1 - tolerance:
            budget = max_evaluations - obj.n_evals
            res = scipy.optimize.minimize(
                obj,
                best_x,
                method="Nelder-Mead",
                options={"maxfev": budget, "xatol": 1e-9, "fatol": tolerance * 1e-3, "adaptive": True},
            )
            improved = res.fun < best_f - 1e-12
            if res.fun <= best_f:
                best_x, best_f = res.x, res.fun
            if not improved:
                break
        return 1.0 - best_f, obj.decode(best_x), obj.n_evals

    workers = thread_count(threads)
    if workers > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, seeds))
    else:
        results = [run(s) for s in seeds]
    fids = tuple(r[0] for r in results)
    best = int(np.argmax(fids))
    return OptimizedPulse(tuple(results[best][1]), fids[best], fids, sum(r[2] for r in results))


def scale_segments(segments: Sequence[PulseSegment], rf_scale: float) -> list[PulseSegment]:
    return [replace(s, amplitude_hz=s.amplitude_hz * rf_scale) for s in segments]


def selective_benchmark(offset_b_hz: float = 2000.0, j_hz: float = 50.0) -> tuple[np.ndarray, SpinSystem]:
    """Target and system for a pi/2 about x on spin A only (spin B untouched)."""
    sys = SpinSystem(offsets_hz=(0.0, offset_b_hz), j_hz=[[0.0, j_hz], [j_hz, 0.0]], labels=("A", "B"), name="selective_benchmark")
    return rotation_propagator(RotationSpec.xy(0.0, math.pi / 2, 1), 2), sys
