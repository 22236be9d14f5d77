"""Non-unitary dynamics: T1/T2 relaxation and the kicked-environment model."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .operators import State, dagger, expm_hermitian, n_spins_of
from .parallel import ordered_map


@dataclass(frozen=True)
class RelaxationModel:
    """Per-spin T1/T2 with an equilibrium ground-state population.

    ``math.inf`` disables a channel. ``ground_population[k]`` is the
    equilibrium probability of ``|0>`` for spin ``k`` (0.5 = fully mixed).
    """

    t1_s: tuple[float, ...]
    t2_s: tuple[float, ...]
    ground_population: tuple[float, ...] | None = None

    def __post_init__(self):
        t1 = tuple(float(v) for v in self.t1_s)
        t2 = tuple(float(v) for v in self.t2_s)
        if len(t1) != len(t2):
            raise ValueError("t1_s and t2_s must have one entry per spin")
        for a, b in zip(t1, t2):
            if not (a > 0 and b > 0):
                raise ValueError("T1 and T2 must be positive (or inf)")
            if b > 2 * a * (1 + 1e-12):
                raise ValueError(f"T2={b} exceeds 2*T1={2 * a}")
        gp = self.ground_population
        gp = (0.5,) * len(t1) if gp is None else tuple(float(v) for v in gp)
        if len(gp) != len(t1) or any(not 0 <= p <= 1 for p in gp):
            raise ValueError("ground_population must be per-spin probabilities")
        object.__setattr__(self, "t1_s", t1)
        object.__setattr__(self, "t2_s", t2)
        object.__setattr__(self, "ground_population", gp)

    @property
    def n_spins(self) -> int:
        return len(self.t1_s)

    @classmethod
    def uniform(cls, n_spins: int, t1_s: float, t2_s: float, ground_population: float = 0.5) -> RelaxationModel:
        return cls((t1_s,) * n_spins, (t2_s,) * n_spins, (ground_population,) * n_spins)


def _damp_spin(rho: np.ndarray, n: int, k: int, gamma: float, lam: float, p: float) -> np.ndarray:
    """Generalized amplitude damping then extra dephasing on spin ``k``."""
    a, b = 2 ** (k - 1), 2 ** (n - k)
    r = rho.reshape(a, 2, b, a, 2, b)
    out = np.empty_like(r)
    r00, r11 = r[:, 0, :, :, 0, :], r[:, 1, :, :, 1, :]
    out[:, 0, :, :, 0, :] = (1 - gamma * (1 - p)) * r00 + gamma * p * r11
    out[:, 1, :, :, 1, :] = (1 - gamma * p) * r11 + gamma * (1 - p) * r00
    c = math.sqrt(1 - gamma) * lam
    out[:, 0, :, :, 1, :] = c * r[:, 0, :, :, 1, :]
    out[:, 1, :, :, 0, :] = c * r[:, 1, :, :, 0, :]
    return out.reshape(rho.shape)


def damping_step(rho: np.ndarray, rm: RelaxationModel, dt: float) -> np.ndarray:
    """Apply every spin's relaxation map for a time ``dt``."""
    n = n_spins_of(rho.shape[0])
    if rm.n_spins != n:
        raise ValueError(f"relaxation model has {rm.n_spins} spins, state has {n}")
    for k in range(1, n + 1):
        t1, t2, p = rm.t1_s[k - 1], rm.t2_s[k - 1], rm.ground_population[k - 1]
        gamma = -math.expm1(-dt / t1)
        lam = math.exp(-dt / t2 + dt / (2 * t1))
        if gamma == 0 and lam == 1:
            continue
        rho = _damp_spin(rho, n, k, gamma, lam, p)
    return rho


def evolve_with_relaxation(rho: State, h: np.ndarray, rm: RelaxationModel, t: float, dt: float) -> State:
    """Evolve ``rho`` for time ``t`` under ``h`` (rad/s) with T1/T2 damping.

    Symmetric Trotter splitting: half unitary step, damping maps, half
    unitary step. ``dt`` is shrunk so that a whole number of steps fits.
    Every step is completely positive and trace preserving.
    """
    if t < 0 or dt <= 0:
        raise ValueError("need t >= 0 and dt > 0")
    if t == 0:
        return rho
    if dt > t:
        raise ValueError("dt must not exceed t")
    n_steps = math.ceil(t / dt - 1e-9)
    dt = t / n_steps
    t_min = min(min(rm.t1_s), min(rm.t2_s))
    h_norm = float(np.max(np.abs(np.linalg.eigvalsh(h)))) if h.size else 0.0
    if dt > 0.1 * t_min or dt * h_norm > 0.5:
        warnings.warn("relaxation step is not small compared to T1/T2 or 1/||h||", RuntimeWarning, stacklevel=2)
    half = expm_hermitian(h, dt / 2)
    half_d = dagger(half)
    r = np.array(rho.rho)
    for _ in range(n_steps):
        r = half @ r @ half_d
        r = damping_step(r, rm, dt)
        r = half @ r @ half_d
    kind = "deviation" if rho.kind == "deviation" else "mixed"
    return State((r + dagger(r)) / 2, kind)


def lindblad_superoperator(h: np.ndarray, rm: RelaxationModel) -> np.ndarray:
    """Row-major vectorized generator ``L`` with ``d vec(rho)/dt = L vec(rho)``.

    Jump operators per spin: ``I_+`` (rate p/T1), ``I_-`` (rate (1-p)/T1)
    and ``2 I_z`` (rate (1/T2 - 1/(2 T1))/2).
    """
    from .operators import spin_operator

    d = h.shape[0]
    n = n_spins_of(d)
    eye = np.eye(d)
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for k in range(1, n + 1):
        t1, t2, p = rm.t1_s[k - 1], rm.t2_s[k - 1], rm.ground_population[k - 1]
        jumps = [
            (spin_operator(n, k, "+"), p / t1),
            (spin_operator(n, k, "-"), (1 - p) / t1),
            (2 * spin_operator(n, k, "z"), (1 / t2 - 1 / (2 * t1)) / 2),
        ]
        for op, rate in jumps:
            if rate == 0:
                continue
            ld = op.conj().T @ op
            gen += rate * (np.kron(op, op.conj()) - 0.5 * np.kron(ld, eye) - 0.5 * np.kron(eye, ld.T))
    return gen


# Decay fitting ---------------------------------------------------------------


class DecayFit(NamedTuple):
    rate_per_s: float
    r_squared: float


def fit_decay_rate(values: Sequence, times: Sequence[float] | None = None, dt: float = 1.0, floor: float = 0.05) -> DecayFit:
    """Fit ``|s(t)| ~ A exp(-R t)`` by least squares on ``log|s|``.

    Only the leading run of points with ``|s| >= floor * |s(0)|`` is used.
    Degenerate input (all zero, fewer than two usable points) returns
    ``rate = nan`` and ``r_squared = 0`` instead of raising.
    """
    y = np.abs(np.asarray(values))
    if y.size < 8:
        raise ValueError("fit_decay_rate needs at least 8 points")
    t = np.arange(y.size) * dt if times is None else np.asarray(times, dtype=float)
    if t.shape != y.shape:
        raise ValueError("times and values differ in length")
    if not y[0] > 0:
        return DecayFit(math.nan, 0.0)
    below = np.nonzero(y < floor * y[0])[0]
    stop = below[0] if below.size else y.size
    if stop < 2:
        return DecayFit(math.nan, 0.0)
    t, ly = t[:stop], np.log(y[:stop])
    slope, icpt = np.polyfit(t, ly, 1)
    resid = ly - (slope * t + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    if ss_tot <= 1e-300:
        slope = 0.0
    return DecayFit(float(-slope) + 0.0, float(r2))


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares ``y = a x + b``; returns ``(a, b, r_squared)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b = np.polyfit(x, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - a * x - b) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), r2


# Kicked environment --------------------------------------------------------

MAX_KICK_DIM = 1024
ANGLE_DISTS = ("small_gaussian", "uniform_0_2pi")


@dataclass(frozen=True)
class KickModel:
    """System spin 1 coupled to ``n_env`` environment spins that get random kicks.

    Hamiltonian: ``w1 I_z^1 + sum_k w_k I_z^k + 2 pi sum_k J_1k I_z^1 I_z^k``
    (offsets and couplings in Hz). Each kick rotates every environment spin
    about ``kick_axis`` by an independent random angle. ``env_state`` is
    the initial environment state: ``"z"`` (all ``|0>``) or ``"x"`` (all
    ``|+x>``). The system starts in ``|+x>``.
    """

    n_env: int
    j_sys_env_hz: tuple[float, ...]
    kick_rate_per_s: float
    kick_angle_dist: str = "small_gaussian"
    sigma_rad: float = 0.3
    omega_sys_hz: float = 0.0
    omega_env_hz: tuple[float, ...] | None = None
    kick_axis: str = "x"
    timing: str = "uniform"
    env_state: str = "z"
    seed: int = 0

    def __post_init__(self):
        if self.n_env < 1:
            raise ValueError("n_env must be >= 1")
        if 2 ** (1 + self.n_env) > MAX_KICK_DIM:
            raise ValueError(f"dimension 2^{1 + self.n_env} exceeds {MAX_KICK_DIM}")
        j = tuple(float(v) for v in self.j_sys_env_hz)
        if len(j) != self.n_env:
            raise ValueError("need one coupling per environment spin")
        object.__setattr__(self, "j_sys_env_hz", j)
        w = (0.0,) * self.n_env if self.omega_env_hz is None else tuple(float(v) for v in self.omega_env_hz)
        if len(w) != self.n_env:
            raise ValueError("need one offset per environment spin")
        object.__setattr__(self, "omega_env_hz", w)
        if self.kick_rate_per_s < 0:
            raise ValueError("kick rate must be >= 0")
        if self.kick_angle_dist not in ANGLE_DISTS:
            raise ValueError(f"kick_angle_dist must be one of {ANGLE_DISTS}")
        if self.kick_axis not in ("x", "y", "z"):
            raise ValueError("kick_axis must be x, y or z")
        if self.timing not in ("uniform", "poisson"):
            raise ValueError("timing must be 'uniform' or 'poisson'")
        if self.env_state not in ("z", "x"):
            raise ValueError("env_state must be 'z' or 'x'")

    @property
    def n_spins(self) -> int:
        return 1 + self.n_env

    def hamiltonian_diagonal(self) -> np.ndarray:
        """Diagonal of the (diagonal) Hamiltonian in rad/s."""
        n = self.n_spins
        idx = np.arange(2**n)
        m = 0.5 - ((idx[:, None] >> np.arange(n - 1, -1, -1)) & 1)
        h = 2 * np.pi * self.omega_sys_hz * m[:, 0]
        for k in range(self.n_env):
            h = h + 2 * np.pi * self.omega_env_hz[k] * m[:, k + 1]
            h = h + 2 * np.pi * self.j_sys_env_hz[k] * m[:, 0] * m[:, k + 1]
        return h


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for Monte Carlo sample ``index``."""
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))


def _draw_angles(km: KickModel, rng: np.random.Generator, size) -> np.ndarray:
    if km.kick_angle_dist == "small_gaussian":
        return rng.normal(0.0, km.sigma_rad, size)
    return rng.uniform(0.0, 2 * np.pi, size)


def _kick_times(km: KickModel, duration_s: float, rng: np.random.Generator | None) -> np.ndarray:
    if km.kick_rate_per_s == 0:
        return np.empty(0)
    if km.timing == "uniform":
        n = int(math.floor(duration_s * km.kick_rate_per_s + 1e-9))
        return np.arange(1, n + 1) / km.kick_rate_per_s
    gaps = rng.exponential(1 / km.kick_rate_per_s, int(duration_s * km.kick_rate_per_s * 2 + 20))
    times = np.cumsum(gaps)
    while times[-1] <= duration_s:
        times = np.concatenate([times, times[-1] + np.cumsum(rng.exponential(1 / km.kick_rate_per_s, 100))])
    return times[times <= duration_s]


def _apply_kick(psi: np.ndarray, n: int, k: int, theta: np.ndarray, axis: str) -> np.ndarray:
    """Rotate spin ``k`` of each row of ``psi`` (shape (S, 2**n)) by ``theta[s]``."""
    s = psi.shape[0]
    r = psi.reshape(s, 2 ** (k - 1), 2, 2 ** (n - k))
    c = np.cos(theta / 2)[:, None, None]
    sn = np.sin(theta / 2)[:, None, None]
    a0, a1 = r[:, :, 0, :], r[:, :, 1, :]
    out = np.empty_like(r)
    if axis == "x":
        out[:, :, 0, :] = c * a0 - 1j * sn * a1
        out[:, :, 1, :] = -1j * sn * a0 + c * a1
    elif axis == "y":
        out[:, :, 0, :] = c * a0 - sn * a1
        out[:, :, 1, :] = sn * a0 + c * a1
    else:
        out[:, :, 0, :] = (c - 1j * sn) * a0
        out[:, :, 1, :] = (c + 1j * sn) * a1
    return out.reshape(psi.shape)


def _initial_ket(km: KickModel) -> np.ndarray:
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    env = plus if km.env_state == "x" else np.array([1, 0], dtype=complex)
    psi = plus
    for _ in range(km.n_env):
        psi = np.kron(psi, env)
    return psi


def _coherence(psi: np.ndarray) -> np.ndarray:
    """``<I_+^1>`` for each row of ``psi``."""
    half = psi.shape[1] // 2
    return np.einsum("sj,sj->s", psi[:, :half].conj(), psi[:, half:])


def _simulate(km: KickModel, times: np.ndarray, kick_times: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Coherence at ``times`` for a batch of realizations sharing kick times.

    ``angles`` has shape (S, n_kicks, n_env).
    """
    n = km.n_spins
    h = km.hamiltonian_diagonal()
    s = angles.shape[0]
    psi = np.tile(_initial_ket(km), (s, 1))
    out = np.empty((s, times.size), dtype=complex)
    t_now = 0.0
    ki = 0
    for ti, t_obs in enumerate(times):
        while ki < kick_times.size and kick_times[ki] <= t_obs:
            psi = psi * np.exp(-1j * h * (kick_times[ki] - t_now))
            t_now = kick_times[ki]
            for k in range(km.n_env):
                psi = _apply_kick(psi, n, k + 2, angles[:, ki, k], km.kick_axis)
            ki += 1
        psi = psi * np.exp(-1j * h * (t_obs - t_now))
        t_now = t_obs
        out[:, ti] = _coherence(psi)
    return out


@dataclass
class KickRun:
    times_s: np.ndarray
    single: np.ndarray
    average: np.ndarray
    n_kicks: int = 0
    extra: dict = field(default_factory=dict)


def kick_model_run(km: KickModel, duration_s: float, n_samples: int, n_times: int = 201, threads: int | None = None) -> KickRun:
    """Monte Carlo over kick realizations.

    Returns the coherence ``<I_+^1>`` of realization 0 and the average over
    ``n_samples`` realizations, sampled on ``n_times`` equally spaced
    times in ``[0, duration_s]``. Realization ``i`` draws from
    ``sample_rng(km.seed, i)``, so results do not depend on batching.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    times = np.linspace(0.0, duration_s, n_times)
    if km.timing == "uniform":
        kt = _kick_times(km, duration_s, None)
        angles = np.stack([_draw_angles(km, sample_rng(km.seed, i), (kt.size, km.n_env)) for i in range(n_samples)])
        chunks = np.array_split(np.arange(n_samples), max(1, min(n_samples, 8)))
        parts = ordered_map(lambda idx: _simulate(km, times, kt, angles[idx]), chunks, threads)
        traj = np.concatenate(parts)
        n_kicks = int(kt.size)
    else:

        def one(i):
            rng = sample_rng(km.seed, i)
            kt = _kick_times(km, duration_s, rng)
            ang = _draw_angles(km, rng, (1, kt.size, km.n_env))
            return _simulate(km, times, kt, ang)[0], kt.size

        res = ordered_map(one, range(n_samples), threads)
        traj = np.stack([r[0] for r in res])
        n_kicks = int(round(np.mean([r[1] for r in res])))
    avg = np.zeros(n_times, dtype=complex)
    for row in traj:
        avg = avg + row
    return KickRun(times, traj[0].copy(), avg / n_samples, n_kicks)
