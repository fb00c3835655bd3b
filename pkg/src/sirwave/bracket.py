"""Ordered upper/lower pair that the crossed map provably keeps in order.

The upper triple is the plateau of the infected-only balance capped on the
left by a pure exponential; the lower triple has only an infected component,
a two-exponential rise joined with zero slope to a plateau. Both are checked
with the discrete map itself, which is the inequality the iteration needs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InfeasibleSolcond, NoPositiveRoot
from .grid import Grid, ProfileFunction, ProfileTriple
from .model import SirParameters, WaveFrameParameters


def plateau_state(p: SirParameters):
    """Largest constant triple the upper bound may use.

    The infected level balances recovery against incidence with no removed or
    shifted-susceptible mass; the other two follow from their linear equations.
    """
    a, b = p.mu2 - p.mu1, p.mu3 - p.mu1
    if a < 0 or b < 0:
        raise InfeasibleSolcond("plateau bound needs mu2 >= mu1 and mu3 >= mu1")
    num = p.beta * p.B / p.mu1 - (p.mu2 + p.gamma)
    if num <= 0:
        raise InfeasibleSolcond("reproduction number below threshold")
    psi = num / (p.beta + p.alpha * (p.mu2 + p.gamma))
    chi = p.gamma * psi / p.mu3
    phi = (a * psi + b * chi) / p.mu1
    return phi, psi, chi


def lower_plateau_cap(p: SirParameters, upper):
    """Infected level below which incidence still beats recovery under ``upper``."""
    phi, _, chi = upper
    num = p.beta * (p.B / p.mu1 - phi - chi) - (p.mu2 + p.gamma)
    return num / (p.beta + p.alpha * (p.mu2 + p.gamma))


def growth_symbol(p: SirParameters, wp: WaveFrameParameters):
    """Linearised incidence equation at zero, as a function of the exponent."""
    r2, r4 = wp.r2, wp.r4
    inc = p.beta * p.B / p.mu1

    def sym(z):
        return (p.D_I * z * z - (p.c * z + p.mu2 + p.gamma) * math.exp(r2 * z)
                + inc * math.exp((r2 - r4) * z))
    return sym


def growth_rates(p: SirParameters, wp: WaveFrameParameters, z_max=None, n=20000):
    """The two smallest positive zeros of :func:`growth_symbol`."""
    sym = growth_symbol(p, wp)
    if z_max is None:
        z_max = 4.0 * p.c / p.D_I + 4.0
    zs = np.linspace(0.0, z_max, n + 1)[1:]
    vals = np.array([sym(z) for z in zs])
    flips = np.nonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))[0]
    if flips.size == 0:
        raise NoPositiveRoot("linearised incidence has no positive exponent; speed too small")
    roots = [brentq(sym, zs[i], zs[i + 1], xtol=1e-15, rtol=1e-15) for i in flips[:2]]
    second = roots[1] if len(roots) > 1 else z_max
    return roots[0], second


@dataclass
class Bracket:
    upper: ProfileTriple
    lower: ProfileTriple
    rate: float
    delta: float
    amplitude: float
    correction: float
    peak_at: float
    peak: float
    upper_slack: float
    lower_slack: float
    tol: float = 0.0

    @property
    def ok(self):
        return self.upper_slack <= self.tol and self.lower_slack >= -self.tol

    def as_json(self):
        return {"rate": self.rate, "delta": self.delta, "amplitude": self.amplitude,
                "correction": self.correction, "peak_at": self.peak_at, "peak": self.peak,
                "upper_slack": self.upper_slack, "lower_slack": self.lower_slack}


def _upper(grid: Grid, state, rate):
    t = grid.t
    cap = np.minimum(1.0, np.exp(rate * np.minimum(t, 0.0)))
    return ProfileTriple(*(ProfileFunction(grid, v * cap, 0.0, v) for v in state))


def _lower(grid: Grid, rate, delta, amp, corr):
    t = grid.t
    peak_at = math.log(rate / (corr * (rate + delta))) / delta
    peak = amp * (math.exp(rate * peak_at) - corr * math.exp((rate + delta) * peak_at))
    tt = np.minimum(t, peak_at)
    psi = amp * (np.exp(rate * tt) - corr * np.exp((rate + delta) * tt))
    zero = ProfileFunction(grid, np.zeros(grid.n), 0.0, 0.0)
    return ProfileTriple(zero, ProfileFunction(grid, psi, 0.0, peak),
                         ProfileFunction(grid, np.zeros(grid.n), 0.0, 0.0)), peak_at, peak


def build_bracket(p: SirParameters, wp: WaveFrameParameters, grid: Grid, kernels,
                  tol=1e-9, max_doublings=60, peak_fraction=0.9):
    """Construct and certify the pair on ``grid``.

    ``upper_slack`` is ``max(F(upper) - upper)`` and ``lower_slack`` is
    ``min(F(lower) - lower)``; the pair is accepted when both are within
    ``tol`` of the right sign. The correction factor doubles until they are.
    """
    from .iteration import apply_F

    state = plateau_state(p)
    for v, m, name in zip(state, wp.M, ("M1", "M2", "M3")):
        if v > m:
            raise InfeasibleSolcond(f"plateau value {v:.4g} exceeds box bound {name}={m:.4g}")
    cap = lower_plateau_cap(p, state)
    if cap <= 0:
        raise InfeasibleSolcond("no positive lower plateau under the upper bound")
    rate, second = growth_rates(p, wp)
    delta = min(rate, 0.5 * (second - rate))
    upper = _upper(grid, state, rate)
    amp = state[1]
    corr = 1.0
    for _ in range(max_doublings):
        lower, peak_at, peak = _lower(grid, rate, delta, amp, corr)
        if peak <= peak_fraction * cap:
            lo = apply_F(lower, kernels, p, wp, cross=upper, check=False)
            lower_slack = min(float(np.min(n.values - o.values)) for n, o in zip(lo, lower))
            if lower_slack >= -tol:
                break
        corr *= 2.0
    else:
        raise InfeasibleSolcond("lower bound not certified after correction doublings")
    up = apply_F(upper, kernels, p, wp, cross=lower, check=False)
    upper_slack = max(float(np.max(n.values - o.values)) for n, o in zip(up, upper))
    if upper_slack > tol:
        raise InfeasibleSolcond(f"upper bound violated by {upper_slack:.3e}")
    return Bracket(upper, lower, rate, delta, amp, corr, peak_at, peak,
                   upper_slack, lower_slack, tol)
