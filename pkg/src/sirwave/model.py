"""Model parameters, equilibria, critical speed and the wave-frame reaction terms.

The wave frame uses the shifted total population ``N~ = B/mu1 - (S + I + R)``
together with ``I`` and ``R``; the profile triple ``(phi, psi, chi)`` holds
``(N~, I, R)`` as functions of the moving coordinate ``t = x + c s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import brentq

from .errors import (ConfigError, DomainViolation, NoEndemicState,
                     NonConvergence, PqmVerificationFailed)

MODEL_KEYS = ("d_s", "d_i", "d_r", "b", "mu1", "mu2", "mu3", "gamma", "alpha",
              "beta", "tau1", "tau2", "tau3", "tau4", "c", "m1", "m2", "m3")

# S may dip below zero by rounding when the box sum bound is tight.
_S_FLOOR = -1e-12


@dataclass(frozen=True)
class SirParameters:
    D_S: float
    D_I: float
    D_R: float
    B: float
    mu1: float
    mu2: float
    mu3: float
    gamma: float
    alpha: float
    beta: float
    tau1: float = 0.0
    tau2: float = 0.0
    tau3: float = 0.0
    tau4: float = 0.0
    c: float = 1.0

    def __post_init__(self):
        for name in ("D_S", "D_I", "D_R", "B", "mu1", "mu2", "mu3", "gamma", "beta", "c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(name, f"must be strictly positive, got {v}")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ConfigError("alpha", f"must be >= 0, got {self.alpha}")
        for name in ("tau1", "tau2", "tau3", "tau4"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(name, f"must be >= 0, got {v}")
        # tau4 <= min(tau1, tau2, tau3); strictness is not enforced.
        if self.tau4 > min(self.tau1, self.tau2, self.tau3) + 1e-15:
            raise ConfigError("tau4", "must not exceed min(tau1, tau2, tau3)")

    @property
    def diffusion(self):
        return (self.D_S, self.D_I, self.D_R)

    @property
    def taus(self):
        return (self.tau1, self.tau2, self.tau3, self.tau4)

    def with_speed(self, c):
        return replace(self, c=c)


@dataclass(frozen=True)
class WaveFrameParameters:
    """Wave-frame constants derived from a :class:`SirParameters`.

    ``k`` is the endemic limit in ``(N~, I, R)`` coordinates. It is not
    required to be positive here; the profile construction checks that.
    """
    r1: float
    r2: float
    r3: float
    r4: float
    beta1: float
    beta2: float
    beta3: float
    M1: float
    M2: float
    M3: float
    k1: float
    k2: float
    k3: float

    @property
    def r(self):
        return (self.r1, self.r2, self.r3)

    @property
    def betas(self):
        return (self.beta1, self.beta2, self.beta3)

    @property
    def M(self):
        return (self.M1, self.M2, self.M3)

    @property
    def k(self):
        return (self.k1, self.k2, self.k3)


def reproduction_number(p: SirParameters) -> float:
    return p.B * p.beta / (p.mu1 * (p.mu2 + p.gamma))


def _threshold_residual(p, infected):
    # Steady state reduced to one unknown: mu1 (1 + alpha I) + beta I = beta B / (mu2 + gamma).
    return p.mu1 * (1.0 + p.alpha * infected) + p.beta * infected - p.beta * p.B / (p.mu2 + p.gamma)


def infected_branch(p: SirParameters) -> float:
    """Signed root I of the reduced steady-state equation.

    Positive exactly when R0 > 1, zero at R0 = 1; below threshold the root is
    negative and has no epidemiological meaning, but it varies continuously
    with the parameters, which is what threshold sweeps look at.
    """
    lo, hi = -1.0, 1.0
    g = lambda x: _threshold_residual(p, x)
    while g(lo) > 0:
        lo *= 2.0
        if lo < -1e12:
            raise NonConvergence("could not bracket steady state from below")
    while g(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise NonConvergence("could not bracket steady state from above")
    return brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def disease_free_equilibrium(p: SirParameters):
    return (p.B / p.mu1, 0.0, 0.0)


def endemic_equilibrium(p: SirParameters):
    """Endemic steady state ``(S*, I*, R*)`` found by a bracketed scalar solve.

    At R0 == 1 (to rounding) the branch meets the disease-free state, which is
    returned. Below threshold :class:`NoEndemicState` is raised.
    """
    r0 = reproduction_number(p)
    if math.isclose(r0, 1.0, rel_tol=1e-12, abs_tol=0.0):
        return disease_free_equilibrium(p)
    if r0 < 1.0:
        raise NoEndemicState(f"reproduction number {r0:.6g} <= 1")
    hi = p.B / (p.mu2 + p.gamma)
    g = lambda x: _threshold_residual(p, x)
    if not (g(0.0) < 0 < g(hi)):
        raise NonConvergence("steady-state residual does not change sign on (0, B/(mu2+gamma))")
    try:
        infected = brentq(g, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    except (RuntimeError, ValueError) as exc:
        raise NonConvergence(str(exc)) from exc
    susceptible = p.B / (p.mu1 + p.beta * infected / (1.0 + p.alpha * infected))
    removed = p.gamma * infected / p.mu3
    return (susceptible, infected, removed)


def printed_endemic_forms(p: SirParameters):
    """Closed forms as typeset in the source, for comparison only.

    The infected and removed numerators carry ``B alpha`` where the threshold
    algebra gives ``B beta``; callers compare, never substitute.
    """
    den = p.beta + p.alpha * p.mu1
    s = (p.B * p.alpha + p.mu2 + p.gamma) / den
    i = (p.B * p.alpha - p.mu1 * (p.mu2 + p.gamma)) / (den * (p.mu2 + p.gamma))
    r = p.gamma * (p.B * p.alpha - p.mu1 * (p.mu2 + p.gamma)) / (p.mu3 * den * (p.mu2 + p.gamma))
    return (s, i, r)


def compare_printed_endemic(p: SirParameters, rtol=1e-9):
    numeric = endemic_equilibrium(p)
    printed = printed_endemic_forms(p)
    agree = tuple(math.isclose(a, b, rel_tol=rtol, abs_tol=1e-12) for a, b in zip(numeric, printed))
    return {"numeric": numeric, "printed": printed, "agree": agree}


def wave_limits(p: SirParameters):
    """Endemic limit ``(k1, k2, k3)`` in ``(N~, I, R)`` coordinates."""
    s, i, r = endemic_equilibrium(p)
    return (p.B / p.mu1 - s - i - r, i, r)


def char_constants(p: SirParameters, M):
    """Constant terms q of the six quadratics ``lambda^2 - c lambda + q``.

    Index order follows P1..P6. The infected pair uses the linearised growth
    ``beta B / mu1 - (gamma + mu2)``.
    """
    M1, M2, M3 = M
    a = p.mu2 - p.mu1
    b = p.mu3 - p.mu1
    return (
        -p.mu1 + a * M2 / M1 + b * M3 / M1,
        -p.mu1,
        p.beta * p.B / p.mu1 - (p.gamma + p.mu2),
        -(p.gamma + p.mu2),
        p.gamma * M2 / M3 - p.mu3,
        -p.mu3,
    )


def critical_wave_speed(wp_or_M, p: SirParameters) -> float:
    """Largest of the six ``2 sqrt(D |q|)`` terms."""
    M = wp_or_M.M if isinstance(wp_or_M, WaveFrameParameters) else tuple(wp_or_M)
    qs = char_constants(p, M)
    diff = (p.D_S, p.D_S, p.D_I, p.D_I, p.D_R, p.D_R)
    return max(2.0 * math.sqrt(d * abs(q)) for d, q in zip(diff, qs))


def reaction(p: SirParameters, phi, psi, chi, psi_lag, check=True):
    """Vectorised wave-frame reaction terms ``(f1, f2, f3)``.

    ``phi, psi, chi`` are the current values and ``psi_lag`` is the infected
    level one incidence delay earlier.
    """
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    chi = np.asarray(chi, dtype=float)
    psi_lag = np.asarray(psi_lag, dtype=float)
    s = p.B / p.mu1 - phi - psi - chi
    if check and np.any(s < _S_FLOOR):
        j = int(np.argmin(s))
        raise DomainViolation(f"susceptible level {np.ravel(s)[j]:.3e} < 0")
    f1 = -p.mu1 * phi + (p.mu2 - p.mu1) * psi + (p.mu3 - p.mu1) * chi
    f2 = -(p.mu2 + p.gamma) * psi + p.beta * s * psi_lag / (1.0 + p.alpha * psi_lag)
    f3 = -p.mu3 * chi + p.gamma * psi
    return f1, f2, f3


def nonlinearity(i: int, phi_hist: Callable, psi_hist: Callable, chi_hist: Callable,
                 p: SirParameters, r4: float = None) -> float:
    """Component ``i`` (1..3) of the reaction for history segments.

    Each history is a callable on ``[-r, 0]``; only the present value and the
    infected value at ``-r4`` enter.
    """
    if i not in (1, 2, 3):
        raise ValueError("component index must be 1, 2 or 3")
    if r4 is None:
        r4 = p.c * p.tau4
    f = reaction(p, phi_hist(0.0), psi_hist(0.0), chi_hist(0.0), psi_hist(-r4))
    return float(f[i - 1])


def lipschitz_constants(p: SirParameters, M):
    """Sup-norm Lipschitz bounds of the reaction on the box ``[0, M]``."""
    M1, M2, M3 = M
    l1 = p.mu1 + abs(p.mu2 - p.mu1) + abs(p.mu3 - p.mu1)
    l2 = (p.mu2 + p.gamma) + 3.0 * p.beta * M2 + p.beta * p.B / p.mu1
    l3 = p.mu3 + p.gamma
    return (l1, l2, l3)


def shift_constants(p: SirParameters, M):
    """Shift constants before verification."""
    return (p.mu1,
            (p.mu2 + p.gamma) + p.beta * M[1] + p.beta * p.B / p.mu1,
            p.mu3 + p.gamma)


def pqm_residuals(p: SirParameters, betas, upper, lower):
    """Left-hand sides of the five partial quasi-monotone inequalities.

    ``upper`` and ``lower`` are 4-tuples of arrays ``(phi, psi, chi, psi_lag)``
    with ``lower <= upper``. P1, P2, P5 must be >= 0 and P3, P4 <= 0; the
    returned array is signed so that every entry must be >= 0.
    """
    b1, b2, b3 = betas
    ph1, ps1, ch1, lg1 = upper
    ph2, ps2, ch2, lg2 = lower
    f_up = reaction(p, ph1, ps1, ch1, lg1, check=False)
    f_lo = reaction(p, ph2, ps2, ch2, lg2, check=False)
    p1 = f_up[0] - f_lo[0] + b1 * (ph1 - ph2)
    # P2: lower the whole infected history, keep phi and chi at the upper level.
    f_mix = reaction(p, ph1, ps2, ch1, lg2, check=False)
    p2 = f_up[1] - f_mix[1] + b2 * (ps1 - ps2)
    # P3: f2 non-increasing in phi.
    f_phi = reaction(p, ph2, ps1, ch1, lg1, check=False)
    p3 = -(f_up[1] - f_phi[1])
    # P4: f2 non-increasing in chi.
    f_chi = reaction(p, ph1, ps1, ch2, lg1, check=False)
    p4 = -(f_up[1] - f_chi[1])
    # P5 read as monotonicity of H3 in its own component.
    f_r = reaction(p, ph1, ps1, ch2, lg1, check=False)
    p5 = f_up[2] - f_r[2] + b3 * (ch1 - ch2)
    return np.stack([p1, p2, p3, p4, p5])


def sample_ordered_box(M, n, rng):
    """Random ordered pairs ``lower <= upper`` in the box with S >= 0."""
    M = np.asarray(M, dtype=float)
    hi = rng.random((n, 4)) * np.array([M[0], M[1], M[2], M[1]])
    lo = hi * rng.random((n, 4))
    # An exactly-equal fraction exercises the boundary of the order.
    lo[: n // 10] = hi[: n // 10]
    return tuple(hi.T), tuple(lo.T)


def pqm_constants(p: SirParameters, wp_or_M, n_samples=10_000, seed=0, tol=1e-12):
    """Shift constants for which the PQM inequalities hold on the box.

    The constants are the partial-derivative bounds from
    :func:`shift_constants`; they are then checked on ``n_samples`` random
    ordered pairs and :class:`PqmVerificationFailed` carries the worst sample.
    """
    M = wp_or_M.M if isinstance(wp_or_M, WaveFrameParameters) else tuple(wp_or_M)
    betas = shift_constants(p, M)
    rng = np.random.default_rng(seed)
    upper, lower = sample_ordered_box(M, n_samples, rng)
    res = pqm_residuals(p, betas, upper, lower)
    worst = res.min(axis=1)
    if np.any(worst < -tol):
        line = int(np.argmin(worst))
        j = int(np.argmin(res[line]))
        sample = {"upper": tuple(float(u[j]) for u in upper),
                  "lower": tuple(float(l[j]) for l in lower),
                  "residual": float(res[line, j])}
        raise PqmVerificationFailed(f"P{line + 1} violated by {res[line, j]:.3e}", sample)
    return betas


def wave_frame(p: SirParameters, M, betas=None) -> WaveFrameParameters:
    """Assemble the wave-frame constants for upper bounds ``M``.

    The sum bound ``M1 + M2 + M3 <= B/mu1`` keeps the incidence numerator
    non-negative on the whole box; it is enforced here.
    """
    M1, M2, M3 = (float(m) for m in M)
    for name, v in (("m1", M1), ("m2", M2), ("m3", M3)):
        if not (math.isfinite(v) and v > 0):
            raise ConfigError(name, f"must be strictly positive, got {v}")
    if M1 + M2 + M3 > p.B / p.mu1 * (1 + 1e-12):
        raise ConfigError("m1", f"M1+M2+M3 = {M1 + M2 + M3:.6g} exceeds B/mu1 = {p.B / p.mu1:.6g}")
    k = wave_limits(p)
    if betas is None:
        betas = shift_constants(p, (M1, M2, M3))
    c = p.c
    return WaveFrameParameters(
        r1=c * p.tau1, r2=c * p.tau2, r3=c * p.tau3, r4=c * p.tau4,
        beta1=betas[0], beta2=betas[1], beta3=betas[2],
        M1=M1, M2=M2, M3=M3, k1=k[0], k2=k[1], k3=k[2])


# ---------------------------------------------------------------- config file

def _parse_value(key, raw):
    raw = raw.strip()
    if key == "c" and raw.replace(" ", "").lower().endswith("*cstar"):
        factor = raw.replace(" ", "")[: -len("*cstar")]
        try:
            return ("cstar", float(factor))
        except ValueError:
            raise ConfigError(key, f"cannot parse speed factor {raw!r}") from None
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(key, f"cannot parse number {raw!r}") from None


def parse_key_values(text: str):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, val = line.split("=", 1)
        elif ":" in line:
            key, val = line.split(":", 1)
        else:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key = key.strip().lower()
        if key in out:
            raise ConfigError(key, "duplicate key")
        out[key] = val.strip()
    return out


def parameters_from_mapping(values: Mapping[str, str]):
    """Build ``(SirParameters, M)`` from the flat model keys.

    ``c`` may be ``"<factor>*cstar"``, in which case the speed is that
    multiple of the critical speed for the given ``M``.
    """
    unknown = sorted(set(values) - set(MODEL_KEYS))
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    missing = [k for k in MODEL_KEYS if k not in values]
    if missing:
        raise ConfigError(missing[0], "missing key")
    parsed = {k: _parse_value(k, str(v)) for k, v in values.items()}
    speed = parsed.pop("c")
    M = (parsed.pop("m1"), parsed.pop("m2"), parsed.pop("m3"))
    kw = dict(D_S=parsed["d_s"], D_I=parsed["d_i"], D_R=parsed["d_r"], B=parsed["b"],
              mu1=parsed["mu1"], mu2=parsed["mu2"], mu3=parsed["mu3"], gamma=parsed["gamma"],
              alpha=parsed["alpha"], beta=parsed["beta"], tau1=parsed["tau1"],
              tau2=parsed["tau2"], tau3=parsed["tau3"], tau4=parsed["tau4"])
    if isinstance(speed, tuple):
        p = SirParameters(**kw, c=1.0)
        for name, v in zip(("m1", "m2", "m3"), M):
            if not v > 0:
                raise ConfigError(name, f"must be strictly positive, got {v}")
        p = p.with_speed(speed[1] * critical_wave_speed(M, p))
    else:
        p = SirParameters(**kw, c=speed)
    return p, M
