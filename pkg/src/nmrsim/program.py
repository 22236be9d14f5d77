"""Pulse-program data types and their JSON forms.

A :class:`PulseProgram` is an ordered tuple of events:

* :class:`Pulse` wrapping either a finite :class:`PulseSegment` or an ideal
  :class:`RotationSpec`,
* :class:`Delay` (free evolution),
* :class:`FrameZ` (zero-time z rotation realized as a frame change).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Union

import numpy as np


def _targets(value) -> tuple[int, ...] | None:
    if value is None:
        return None
    if isinstance(value, (int, np.integer)):
        return (int(value),)
    out = tuple(int(v) for v in value)
    if not out:
        raise ValueError("empty target list")
    return out


@dataclass(frozen=True)
class PulseSegment:
    """Constant-amplitude RF segment.

    ``targets=None`` irradiates every spin; otherwise only the listed
    (1-based) spins, as for per-channel heteronuclear pulses.
    """

    amplitude_hz: float
    phase_rad: float
    duration_s: float
    transmitter_offset_hz: float = 0.0
    targets: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.amplitude_hz < 0:
            raise ValueError("amplitude_hz must be >= 0")
        if not self.duration_s > 0:
            raise ValueError("duration_s must be > 0")
        object.__setattr__(self, "targets", _targets(self.targets))

    def to_dict(self) -> dict:
        return {
            "amplitude_hz": self.amplitude_hz,
            "phase_rad": self.phase_rad,
            "duration_s": self.duration_s,
            "transmitter_offset_hz": self.transmitter_offset_hz,
            "targets": None if self.targets is None else list(self.targets),
        }

    @classmethod
    def from_dict(cls, d: dict) -> PulseSegment:
        return cls(
            amplitude_hz=float(d["amplitude_hz"]),
            phase_rad=float(d.get("phase_rad", 0.0)),
            duration_s=float(d["duration_s"]),
            transmitter_offset_hz=float(d.get("transmitter_offset_hz", 0.0)),
            targets=d.get("targets"),
        )


@dataclass(frozen=True)
class RotationSpec:
    """Ideal rotation ``exp[-i (1+eps) angle n.I]`` on one or more spins."""

    axis: tuple[float, float, float]
    angle_rad: float
    spin: int | tuple[int, ...] = 1
    amplitude_error: float = 0.0

    def __post_init__(self):
        axis = tuple(float(a) for a in self.axis)
        if len(axis) != 3:
            raise ValueError("axis must be a 3-vector")
        if abs(math.fsum(a * a for a in axis) - 1.0) > 2e-12:
            raise ValueError("axis must be a unit vector")
        object.__setattr__(self, "axis", axis)
        spins = _targets(self.spin)
        object.__setattr__(self, "spin", spins[0] if len(spins) == 1 else spins)

    @property
    def targets(self) -> tuple[int, ...]:
        return _targets(self.spin)

    @classmethod
    def xy(cls, phase_rad: float, angle_rad: float, spin=1, amplitude_error: float = 0.0) -> RotationSpec:
        """Rotation about ``[cos phase, sin phase, 0]``."""
        return cls((math.cos(phase_rad), math.sin(phase_rad), 0.0), angle_rad, spin, amplitude_error)

    def with_error(self, eps: float) -> RotationSpec:
        return replace(self, amplitude_error=eps)

    def to_dict(self) -> dict:
        return {
            "axis": list(self.axis),
            "angle_rad": self.angle_rad,
            "spin": list(self.targets) if len(self.targets) > 1 else self.targets[0],
            "amplitude_error": self.amplitude_error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> RotationSpec:
        axis = d["axis"]
        if isinstance(axis, str):
            axis = {"x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1), "-x": (-1, 0, 0), "-y": (0, -1, 0)}[axis]
        return cls(tuple(axis), float(d["angle_rad"]), d.get("spin", 1), float(d.get("amplitude_error", 0.0)))


CompositeSequence = tuple  # of RotationSpec, first element applied first


@dataclass(frozen=True)
class Pulse:
    element: PulseSegment | RotationSpec

    @property
    def duration_s(self) -> float:
        return self.element.duration_s if isinstance(self.element, PulseSegment) else 0.0


@dataclass(frozen=True)
class Delay:
    duration_s: float

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ValueError("delay duration must be > 0")


@dataclass(frozen=True)
class FrameZ:
    spin: int
    angle_rad: float
    duration_s: float = 0.0


Event = Union[Pulse, Delay, FrameZ]


@dataclass(frozen=True)
class PulseProgram:
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        events = tuple(self.events)
        for ev in events:
            if not isinstance(ev, (Pulse, Delay, FrameZ)):
                raise TypeError(f"not a program event: {ev!r}")
        object.__setattr__(self, "events", events)

    def __add__(self, other: PulseProgram) -> PulseProgram:
        return PulseProgram(self.events + other.events)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def duration_s(self) -> float:
        return math.fsum(ev.duration_s for ev in self.events)

    def to_dict(self) -> dict:
        return {"events": [event_to_dict(ev) for ev in self.events]}

    @classmethod
    def from_dict(cls, d: dict) -> PulseProgram:
        if set(d) - {"events"}:
            raise ValueError(f"unknown program keys: {sorted(set(d) - {'events'})}")
        return cls(tuple(event_from_dict(e) for e in d["events"]))

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path) -> PulseProgram:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def program(*parts: Event | PulseProgram | Iterable[Event]) -> PulseProgram:
    """Flatten events and sub-programs into one program."""
    events: list[Event] = []
    for part in parts:
        if isinstance(part, PulseProgram):
            events.extend(part.events)
        elif isinstance(part, (Pulse, Delay, FrameZ)):
            events.append(part)
        else:
            events.extend(part)
    return PulseProgram(tuple(events))


def event_to_dict(ev: Event) -> dict:
    if isinstance(ev, Delay):
        return {"type": "delay", "duration_s": ev.duration_s}
    if isinstance(ev, FrameZ):
        return {"type": "framez", "spin": ev.spin, "angle_rad": ev.angle_rad}
    if isinstance(ev.element, PulseSegment):
        return {"type": "pulse", "segment": ev.element.to_dict()}
    return {"type": "pulse", "rotation": ev.element.to_dict()}


def event_from_dict(d: dict) -> Event:
    kind = d.get("type")
    if kind == "delay":
        return Delay(float(d["duration_s"]))
    if kind == "framez":
        return FrameZ(int(d["spin"]), float(d["angle_rad"]))
    if kind == "pulse":
        if "segment" in d:
            return Pulse(PulseSegment.from_dict(d["segment"]))
        if "rotation" in d:
            return Pulse(RotationSpec.from_dict(d["rotation"]))
        raise ValueError("pulse event needs 'segment' or 'rotation'")
    raise ValueError(f"unknown event type {kind!r}")


@dataclass(frozen=True)
class EnsembleMember:
    rf_scale: float = 1.0
    b0_offset_hz: float = 0.0
    weight: float = 1.0


@dataclass(frozen=True)
class EnsembleSpec:
    """Discrete weighted distribution of RF scalings and static offsets."""

    members: tuple[EnsembleMember, ...]

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("ensemble must have at least one member")
        if any(m.weight <= 0 for m in members):
            raise ValueError("ensemble weights must be positive")
        if abs(math.fsum(m.weight for m in members) - 1) > 1e-12:
            raise ValueError("ensemble weights must sum to 1")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    @classmethod
    def single(cls) -> EnsembleSpec:
        return cls((EnsembleMember(),))

    @classmethod
    def from_arrays(cls, rf_scale=None, b0_offset_hz=None, weights=None) -> EnsembleSpec:
        n = len(next(v for v in (rf_scale, b0_offset_hz, weights) if v is not None))
        rf = np.ones(n) if rf_scale is None else np.asarray(rf_scale, dtype=float)
        off = np.zeros(n) if b0_offset_hz is None else np.asarray(b0_offset_hz, dtype=float)
        w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
        w = w / math.fsum(w)
        return cls(tuple(EnsembleMember(float(a), float(b), float(c)) for a, b, c in zip(rf, off, w)))

    @classmethod
    def gaussian_offsets(cls, sigma_hz: float, n_points: int = 21, width_sigmas: float = 3.0) -> EnsembleSpec:
        """Static-offset grid over +-``width_sigmas`` with Gaussian weights."""
        if n_points == 1 or sigma_hz == 0:
            return cls.single()
        x = np.linspace(-width_sigmas, width_sigmas, n_points)
        return cls.from_arrays(b0_offset_hz=x * sigma_hz, weights=np.exp(-0.5 * x**2))

    @classmethod
    def rf_grid(cls, low: float = 0.9, high: float = 1.1, n_points: int = 11) -> EnsembleSpec:
        """RF-scale grid with Gaussian weights centred on the middle of the range."""
        x = np.linspace(-1.0, 1.0, n_points)
        return cls.from_arrays(rf_scale=np.linspace(low, high, n_points), weights=np.exp(-2.0 * x**2))

    def to_dict(self) -> dict:
        return {"members": [{"rf_scale": m.rf_scale, "b0_offset_hz": m.b0_offset_hz, "weight": m.weight} for m in self.members]}

    @classmethod
    def from_dict(cls, d: dict) -> EnsembleSpec:
        ms = d["members"]
        return cls.from_arrays(
            rf_scale=[m.get("rf_scale", 1.0) for m in ms],
            b0_offset_hz=[m.get("b0_offset_hz", 0.0) for m in ms],
            weights=[m.get("weight", 1.0) for m in ms],
        )
