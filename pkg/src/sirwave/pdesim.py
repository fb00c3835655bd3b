"""Explicit method-of-lines simulation of the delayed system in ``(N~, I, R)``.

Each diffusion term acts on the field one diffusion delay in the past, read
from a ring buffer of snapshots with linear interpolation; the incidence uses
the infected field one incidence delay in the past.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import kernels
from .errors import BlowUp, ConfigError, HistoryUnderflow, NoFront
from .grid import ProfileTriple
from .model import SirParameters, reaction

BLOW_UP = 1e6


def _coef(p: SirParameters):
    return np.array([p.D_S, p.D_I, p.D_R, p.B, p.mu1, p.mu2, p.mu3, p.gamma, p.alpha, p.beta])


@dataclass
class PdeState:
    x: np.ndarray
    fields: np.ndarray
    history: np.ndarray
    head: int
    dt: float
    time: float = 0.0
    clip_events: int = 0

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    @property
    def depth(self):
        return self.history.shape[0]

    def delayed(self, tau):
        """Fields at ``time - tau``, linear between stored snapshots."""
        k = tau / self.dt
        lo = int(math.floor(k + 1e-12))
        frac = k - lo
        if lo + (1 if frac > 1e-12 else 0) >= self.depth:
            raise HistoryUnderflow(f"delay {tau} needs more than {self.depth} snapshots")
        a = self.history[(self.head - lo) % self.depth]
        if frac <= 1e-12:
            return a
        b = self.history[(self.head - lo - 1) % self.depth]
        return (1.0 - frac) * a + frac * b


def history_depth(p: SirParameters, dt):
    return int(math.ceil(max(p.taus) / dt - 1e-12)) + 1


def initial_state(x, fields, p: SirParameters, dt):
    """State whose history holds ``fields`` constant over the longest delay."""
    x = np.asarray(x, dtype=float)
    fields = np.array(fields, dtype=float)
    if fields.shape != (3, x.size):
        raise ConfigError("fields", f"expected shape (3, {x.size}), got {fields.shape}")
    if not dt > 0:
        raise ConfigError("dt", "must be positive")
    depth = history_depth(p, dt) + 1
    hist = np.repeat(fields[None], depth, axis=0)
    return PdeState(x, fields.copy(), hist, depth - 1, float(dt))


def stable_dt(dx, p: SirParameters, safety=0.4):
    return safety * dx * dx / max(p.diffusion)


def step(state: PdeState, p: SirParameters, dt=None, clip=True):
    """One explicit Euler step, in place. Returns ``state``."""
    if dt is not None and abs(dt - state.dt) > 1e-12 * state.dt:
        raise HistoryUnderflow(f"step {dt} differs from snapshot spacing {state.dt}")
    dx = state.dx
    if state.dt > stable_dt(dx, p) * (1 + 1e-12):
        raise ConfigError("dt", f"{state.dt} exceeds 0.4 dx^2 / max D = {stable_dt(dx, p):.3e}")
    delayed = np.stack([state.delayed(tau)[i] for i, tau in enumerate(p.taus[:3])])
    lag = np.ascontiguousarray(state.delayed(p.tau4)[1])
    out = np.empty_like(state.fields)
    kernels.advance(np.ascontiguousarray(state.fields), np.ascontiguousarray(delayed), lag, out,
                    dx, state.dt, _coef(p))
    if clip:
        neg = out[1:] < 0
        n_neg = int(np.count_nonzero(neg))
        if n_neg:
            out[1:][neg] = 0.0
            state.clip_events += n_neg
    if not np.all(np.isfinite(out)) or np.max(np.abs(out)) > BLOW_UP:
        raise BlowUp(f"field magnitude above {BLOW_UP:g} at t={state.time + state.dt:.4f}")
    state.fields = out
    state.head = (state.head + 1) % state.depth
    state.history[state.head] = out
    state.time += state.dt
    return state


def classical_step(fields, x, p: SirParameters, dt):
    """Undelayed reference step built from a sparse Neumann Laplacian."""
    n = len(x)
    dx = float(x[1] - x[0])
    main = np.full(n, -2.0)
    upper = np.ones(n - 1)
    lower = np.ones(n - 1)
    upper[0] = 2.0
    lower[-1] = 2.0
    lap = sparse.diags([lower, main, upper], [-1, 0, 1], format="csr") / (dx * dx)
    phi, psi, chi = fields
    f = reaction(p, phi, psi, chi, psi, check=False)
    return np.stack([fields[i] + dt * (d * (lap @ fields[i]) + f[i])
                     for i, d in enumerate(p.diffusion)])


@dataclass
class Trajectory:
    x: np.ndarray
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    def record(self, state: PdeState):
        self.times.append(state.time)
        self.snapshots.append(state.fields.copy())

    @property
    def infected(self):
        return np.array([s[1] for s in self.snapshots])


def simulate(state: PdeState, p: SirParameters, t_final, snapshot_every=1, clip=True):
    """Advance to ``t_final`` recording every ``snapshot_every`` steps."""
    traj = Trajectory(state.x.copy())
    traj.record(state)
    n_steps = int(round((t_final - state.time) / state.dt))
    for n in range(1, n_steps + 1):
        step(state, p, clip=clip)
        if n % snapshot_every == 0 or n == n_steps:
            traj.record(state)
    return traj


def front_position(x, values, level, window=None):
    """Leftmost upward crossing of ``level`` inside ``window``, sub-grid linear."""
    above = values >= level
    idx = np.nonzero(above[1:] & ~above[:-1])[0]
    lo, hi = window if window is not None else (x[0], x[-1])
    for j in idx:
        x0, x1 = x[j], x[j + 1]
        pos = x0 + (level - values[j]) / (values[j + 1] - values[j]) * (x1 - x0)
        if lo <= pos <= hi:
            return float(pos)
    return None


def middle_window(x, fraction=0.6):
    span = x[-1] - x[0]
    pad = 0.5 * (1 - fraction) * span
    return (x[0] + pad, x[-1] - pad)


def front_speed(traj: Trajectory, level, window=None):
    """Speed of the level set of the infected field, positive when it moves left.

    The fit uses the second half of the recorded snapshots.
    """
    if window is None:
        window = middle_window(traj.x)
    times, pos = [], []
    for t, snap in zip(traj.times, traj.snapshots):
        xp = front_position(traj.x, snap[1], level, window)
        if xp is not None:
            times.append(t)
            pos.append(xp)
    if len(times) < 4:
        raise NoFront(f"level {level:.4g} crossed in only {len(times)} snapshots")
    half = len(times) // 2
    t = np.array(times[half:])
    xs = np.array(pos[half:])
    if t[-1] - t[0] <= 0:
        raise NoFront("front positions do not span any time")
    slope = np.polyfit(t, xs, 1)[0]
    return float(-slope)


def wave_initial_fields(wave: ProfileTriple, x, shift=0.0):
    """Fields ``wave(x + shift)``; the wave is read through its tails off-grid."""
    xi = np.asarray(x, dtype=float) + shift
    return np.stack([np.asarray(c(xi)) for c in wave])


@dataclass
class WaveComparison:
    times: list
    sup: list
    l2: list
    shift0: float

    @property
    def worst_sup(self):
        return max(self.sup)

    def as_json(self):
        return {"times": list(map(float, self.times)), "sup": list(map(float, self.sup)),
                "l2": list(map(float, self.l2)), "shift0": float(self.shift0)}


def compare_with_wave(traj: Trajectory, wave: ProfileTriple, c, level, window=None):
    """Discrepancy between the simulated infected field and the travelling wave.

    The shift is fixed from the first snapshot's level crossing and then moved
    with speed ``c``, so a wrong speed shows up as a growing error.
    """
    if window is None:
        window = middle_window(traj.x)
    psi = wave.psi
    g = psi.grid
    xi_level = front_position(g.t, psi.values, level)
    x0 = front_position(traj.x, traj.snapshots[0][1], level, window)
    if xi_level is None or x0 is None:
        raise NoFront("level not crossed by the wave or the first snapshot")
    shift0 = xi_level - x0
    mask = (traj.x >= window[0]) & (traj.x <= window[1])
    dx = float(traj.x[1] - traj.x[0])
    sup, l2 = [], []
    for t, snap in zip(traj.times, traj.snapshots):
        ref = psi(traj.x[mask] + shift0 + c * (t - traj.times[0]))
        diff = snap[1][mask] - ref
        sup.append(float(np.max(np.abs(diff))))
        l2.append(float(math.sqrt(np.sum(diff * diff) * dx)))
    return WaveComparison(list(traj.times), sup, l2, shift0)
