"""Piecewise-exponential super and sub solution triples and their certification.

Each component is an exponential ``k e^{g t} / m`` on the left of a break and
``k +- eps e^{-eta t}`` on the right. Upper components all grow at the
infected rate; lower components use their own quadratic roots. The free
amplitudes come from a linear program over the six tail inequalities and the
common tail rate from bisection on the case scans.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, linprog

from .charroots import compute_roots
from .errors import BreakNotFound, CaseViolation, InfeasibleSolcond
from .grid import Grid, ProfileFunction, ProfileTriple
from .model import SirParameters, WaveFrameParameters, reaction

SUPER, SUB = "super", "sub"


@dataclass(frozen=True)
class PiecewiseExpProfile:
    k: float
    growth: float
    break_t: float
    eps: float
    eta: float
    big_m: float = 1.0
    side: str = SUPER

    @property
    def sign(self):
        return 1.0 if self.side == SUPER else -1.0

    def _parts(self, t):
        t = np.asarray(t, dtype=float)
        left = t <= self.break_t
        tl = np.minimum(t, self.break_t)
        tr = np.maximum(t, self.break_t)
        el = self.k / self.big_m * np.exp(self.growth * tl)
        er = self.sign * self.eps * np.exp(-self.eta * tr)
        return left, el, er

    def value(self, t):
        left, el, er = self._parts(t)
        return np.where(left, el, self.k + er)

    def d1(self, t):
        left, el, er = self._parts(t)
        return np.where(left, self.growth * el, -self.eta * er)

    def d2(self, t):
        left, el, er = self._parts(t)
        return np.where(left, self.growth ** 2 * el, self.eta ** 2 * er)

    def one_sided(self, t, order):
        """``(left, right)`` derivatives of ``order`` at ``t``."""
        el = self.k / self.big_m * self.growth ** order * math.exp(self.growth * t)
        er = self.sign * self.eps * (-self.eta) ** order * math.exp(-self.eta * t)
        if order == 0:
            er += self.k
        return el, er

    def continuity_defect(self):
        a, b = self.one_sided(self.break_t, 0)
        return abs(a - b)


def solve_break(k, growth, eps, eta, big_m=1.0, side=SUPER):
    """Break point where the left branch meets the right one.

    Upper profiles have a unique crossing. Lower branches cross twice; the
    later crossing is used so the decaying branch only covers values close to
    the limit. The resulting kink is concave, so lower profiles are lower
    solutions only away from their breaks.
    """
    if side == SUPER:
        fn = lambda t: k / big_m * math.exp(growth * t) - k - eps * math.exp(-eta * t)
        hi = 1.0
        while fn(hi) < 0:
            hi *= 2.0
            if hi > 1e6:
                raise BreakNotFound("upper branches never meet")
        lo = 0.0 if fn(0.0) < 0 else -1.0
        while fn(lo) > 0:
            lo *= 2.0
        return brentq(fn, lo, hi, xtol=1e-15, rtol=1e-15)
    fn = lambda t: k / big_m * math.exp(growth * t) - k + eps * math.exp(-eta * t)
    t_min = math.log(eps * eta * big_m / (k * growth)) / (growth + eta) if eps > 0 else -math.inf
    if eps > 0 and fn(t_min) >= 0:
        raise BreakNotFound(f"lower branches do not meet (gap {fn(t_min):.3e})")
    lo = max(t_min, math.log(big_m) / growth - 1.0) if eps > 0 else -1.0
    while fn(lo) >= 0:
        lo -= 1.0
    hi = math.log(big_m) / growth + 1.0
    while fn(hi) <= 0:
        hi += 1.0
        if hi > 1e6:
            raise BreakNotFound("no lower crossing found")
    return brentq(fn, lo, hi, xtol=1e-15, rtol=1e-15)


# ----------------------------------------------------------- tail inequalities

@dataclass
class SolcondCertificate:
    eps: tuple  # eps0..eps6
    residuals: tuple
    eta: float = 0.0

    @property
    def ok(self):
        return all(r > 0 for r in self.residuals)


def _incidence_partials(p: SirParameters, k):
    s_star = p.B / p.mu1 - sum(k)
    g = k[1] / (1.0 + p.alpha * k[1])
    d_cross = -p.beta * g
    d_own = -(p.mu2 + p.gamma) - p.beta * g
    d_lag = p.beta * s_star / (1.0 + p.alpha * k[1]) ** 2
    return d_cross, d_own, d_lag


def tail_margins(p: SirParameters, wp: WaveFrameParameters, eps, eta=0.0):
    """The six tail inequalities as margins that must be positive.

    ``eps`` is ``(eps1, ..., eps6)``; odd entries are upper amplitudes, even
    entries lower ones. Order: upper phi, upper chi, upper psi, lower phi,
    lower chi, lower psi.
    """
    e1, e2, e3, e4, e5, e6 = eps
    a, b = p.mu2 - p.mu1, p.mu3 - p.mu1
    c = p.c
    w1, w2, w3 = (math.exp(-eta * r) for r in (wp.r1, wp.r2, wp.r3))
    lag = math.exp(eta * wp.r4)
    d_cross, d_own, d_lag = _incidence_partials(p, wp.k)
    up1 = -(p.D_S * eta ** 2 * e1 + w1 * (c * eta * e1 - p.mu1 * e1 + a * e3 + b * e5))
    up2 = -(p.D_I * eta ** 2 * e3 + w2 * (c * eta * e3 + d_own * e3 + d_lag * lag * e3
                                          - d_cross * (e2 + e6)))
    up3 = -(p.D_R * eta ** 2 * e5 + w3 * (c * eta * e5 - p.mu3 * e5 + p.gamma * e3))
    lo1 = -p.D_S * eta ** 2 * e2 + w1 * (-c * eta * e2 + p.mu1 * e2 - a * e4 - b * e6)
    lo2 = -p.D_I * eta ** 2 * e4 + w2 * (-c * eta * e4 - d_own * e4 - d_lag * lag * e4
                                         + d_cross * (e1 + e5))
    lo3 = -p.D_R * eta ** 2 * e6 + w3 * (-c * eta * e6 + p.mu3 * e6 - p.gamma * e4)
    return (up1, up3, up2, lo1, lo3, lo2)


def solcond_certificate(p, wp, eps7, eta=0.0):
    eps0 = eps7[0]
    margins = tail_margins(p, wp, eps7[1:], eta)
    return SolcondCertificate(tuple(eps7), tuple(m - eps0 for m in margins), eta)


def _margin_matrix(p, wp, eta):
    A = np.zeros((6, 6))
    for j in range(6):
        unit = np.zeros(6)
        unit[j] = 1.0
        A[:, j] = tail_margins(p, wp, unit, eta)
    return A


def _check_limits(wp):
    k, M = wp.k, wp.M
    bad = [i for i in range(3) if not k[i] > 0]
    if bad:
        raise InfeasibleSolcond(f"limit k{bad[0] + 1} = {k[bad[0]]:.6g} is not positive; "
                                "no profile in [0, M] can reach it", line=bad[0] + 1)
    over = [i for i in range(3) if k[i] >= M[i]]
    if over:
        raise InfeasibleSolcond(f"limit k{over[0] + 1} is not below M{over[0] + 1}",
                                line=over[0] + 1)


def _amplitude_program(p, wp, eta, theta):
    k, M = wp.k, wp.M
    A = _margin_matrix(p, wp, eta)
    # Variables: eps1..eps6, eps0; maximise eps0 subject to A eps >= eps0.
    A_ub = np.hstack([-A, np.ones((6, 1))])
    bounds = [(0.0, M[0] - k[0]), (0.0, theta * k[0]), (0.0, M[1] - k[1]), (0.0, theta * k[1]),
              (0.0, M[2] - k[2]), (0.0, theta * k[2]), (None, 1.0)]
    res = linprog(np.r_[np.zeros(6), -1.0], A_ub=A_ub, b_ub=np.zeros(6), bounds=bounds,
                  method="highs")
    if res.status != 0:
        raise InfeasibleSolcond(f"amplitude program failed: {res.message}", line=0)
    return res.x[:6], float(res.x[6]), A


def solve_amplitudes(p: SirParameters, wp: WaveFrameParameters, eta=0.0, theta=0.25):
    """Amplitudes with the largest common slack in the tail inequalities at ``eta``.

    Upper amplitudes are capped by ``M - k`` and lower ones by ``theta k``;
    a small lower amplitude keeps the decaying lower branch close to its limit
    where it is used. The ordering itself is checked pointwise afterwards.
    Returns ``(eps0, eps1, ..., eps6)`` with half the optimal slack as eps0.
    """
    _check_limits(wp)
    eps, eps0, A = _amplitude_program(p, wp, eta, theta)
    if eps0 <= 0:
        line = int(np.argmin(A @ eps)) + 1
        raise InfeasibleSolcond(
            f"tail inequality {line} cannot hold with positive slack (best {eps0:.3e})", line=line)
    return (0.5 * eps0, *(float(e) for e in eps))


def tail_rate_limit(p, wp, theta=0.25, eta_cap=1.0, steps=40):
    """Largest tail rate at which the tail inequalities stay feasible."""
    _check_limits(wp)
    feasible = lambda eta: _amplitude_program(p, wp, eta, theta)[1] > 1e-12
    if not feasible(0.0):
        eps, eps0, A = _amplitude_program(p, wp, 0.0, theta)
        line = int(np.argmin(A @ eps)) + 1
        raise InfeasibleSolcond(
            f"tail inequality {line} cannot hold with positive slack (best {eps0:.3e})", line=line)
    if feasible(eta_cap):
        return eta_cap
    lo, hi = 0.0, eta_cap
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if feasible(mid) else (lo, mid)
    return lo


# --------------------------------------------------------------- the triples

@dataclass
class ProfileParameters:
    certificate: SolcondCertificate
    breaks: tuple  # t1..t6: upper phi, psi, chi, lower phi, psi, chi
    eta: float
    big_m: float
    growth_super: tuple
    growth_sub: tuple
    k: tuple
    eta_star: dict = field(default_factory=dict)

    @property
    def eps(self):
        return self.certificate.eps

    def as_json(self):
        out = {f"eps{i}": float(v) for i, v in enumerate(self.eps)}
        out.update({f"t{i + 1}": float(v) for i, v in enumerate(self.breaks)})
        out["eta"] = float(self.eta)
        out["big_m"] = float(self.big_m)
        out["residuals"] = [float(r) for r in self.certificate.residuals]
        return out


def _breaks(k, eps, growth_super, growth_sub, eta, big_m):
    e = eps[1:]
    up = tuple(solve_break(k[i], growth_super[i], e[2 * i], eta, 1.0, SUPER) for i in range(3))
    lo = tuple(solve_break(k[i], growth_sub[i], e[2 * i + 1], eta, big_m, SUB) for i in range(3))
    return up + lo


def _profiles(k, eps, breaks, growth_super, growth_sub, eta, big_m):
    e = eps[1:]
    up = [PiecewiseExpProfile(k[i], growth_super[i], breaks[i], e[2 * i], eta, 1.0, SUPER)
          for i in range(3)]
    lo = [PiecewiseExpProfile(k[i], growth_sub[i], breaks[3 + i], e[2 * i + 1], eta, big_m, SUB)
          for i in range(3)]
    return up, lo


def build_super(params: ProfileParameters):
    return _profiles(params.k, params.eps, params.breaks, params.growth_super,
                     params.growth_sub, params.eta, params.big_m)[0]


def build_sub(params: ProfileParameters):
    return _profiles(params.k, params.eps, params.breaks, params.growth_super,
                     params.growth_sub, params.eta, params.big_m)[1]


def sample_triple(profiles, grid: Grid, mu=0.0):
    """Sample analytic profiles on ``grid`` with tails ``0`` and ``k``."""
    t = grid.t
    return ProfileTriple(*(ProfileFunction(grid, pr.value(t), 0.0, pr.k) for pr in profiles),
                         mu=mu)


# --------------------------------------------------------- operator and cases

def wave_operator(p: SirParameters, wp: WaveFrameParameters, own, other, t, side=SUPER):
    """Left-hand sides of the three wave equations at ``t``.

    ``own`` supplies every component except the two cross terms of the
    incidence equation, which come from ``other`` (the opposite bound). Each
    entry needs ``value``, ``d1`` and ``d2`` callables.
    """
    t = np.asarray(t, dtype=float)
    D = (p.D_S, p.D_I, p.D_R)
    r = (wp.r1, wp.r2, wp.r3)
    out = []
    for i in range(3):
        s = t + r[i]
        if i == 1:
            phi, chi = other[0].value(s), other[2].value(s)
        else:
            phi, chi = own[0].value(s), own[2].value(s)
        psi = own[1].value(s)
        lag = own[1].value(s - wp.r4)
        f = reaction(p, phi, psi, chi, lag, check=False)[i]
        out.append(D[i] * own[i].d2(t) - p.c * own[i].d1(s) + f)
    return out


def _involved_breaks(breaks, side):
    up, lo = breaks[:3], breaks[3:]
    mine, theirs = (up, lo) if side == SUPER else (lo, up)
    return ((mine[0], mine[1], mine[2]),
            (mine[1], theirs[0], theirs[2]),
            (mine[2], mine[1]))


@dataclass
class CaseResult:
    side: str
    equation: int
    case: int
    t_lo: float
    t_hi: float
    worst: float
    worst_t: float
    n: int
    ok: bool


def case_regions(breaks, side, eq, r, reach_left, reach_right):
    b = _involved_breaks(breaks, side)[eq]
    lo, hi = min(b) - r, max(b) - r
    return ((1, lo - reach_left, lo), (2, lo, hi), (3, hi, hi + reach_right))


def check_cases(p, wp, params: ProfileParameters, side=SUPER, n=1000, tol=1e-12,
                raise_on_fail=False):
    """Scan every case region of every equation for the required sign."""
    up, lo = _profiles(params.k, params.eps, params.breaks, params.growth_super,
                       params.growth_sub, params.eta, params.big_m)
    own, other = (up, lo) if side == SUPER else (lo, up)
    sign = 1.0 if side == SUPER else -1.0
    r = (wp.r1, wp.r2, wp.r3)
    g_min = min(params.growth_super + params.growth_sub)
    reach_left = 30.0 / g_min
    reach_right = 30.0 / params.eta
    kinks = np.array(params.breaks)
    results = []
    for eq in range(3):
        for case, a, b in case_regions(params.breaks, side, eq, r[eq], reach_left, reach_right):
            if b - a <= 0:
                results.append(CaseResult(side, eq + 1, case, a, b, -math.inf, a, 0, True))
                continue
            t = np.linspace(a, b, n)
            half = 0.5 * (b - a) / (n - 1)
            # Exclude half-step windows around every shifted break.
            shifts = np.concatenate([kinks, kinks - r[eq], kinks - r[eq] + wp.r4])
            mask = np.all(np.abs(t[:, None] - shifts[None, :]) > half, axis=1)
            t = t[mask]
            vals = sign * wave_operator(p, wp, own, other, t, side)[eq]
            j = int(np.argmax(vals))
            scale = max(1.0, max(params.k))
            ok = bool(vals[j] <= tol * scale)
            res = CaseResult(side, eq + 1, case, a, b, float(sign * vals[j]), float(t[j]), t.size, ok)
            results.append(res)
            if raise_on_fail and not ok:
                raise CaseViolation(eq + 1, case, float(t[j]), float(sign * vals[j]))
    return results


def check_super_cases(p, wp, params, **kw):
    return check_cases(p, wp, params, SUPER, **kw)


def check_sub_cases(p, wp, params, **kw):
    return check_cases(p, wp, params, SUB, **kw)


def ordering_gap(params: ProfileParameters, n=4000):
    """Smallest ``upper - lower`` over a scan covering all breaks."""
    up, lo = build_super(params), build_sub(params)
    g_min = min(params.growth_super + params.growth_sub)
    t = np.linspace(min(params.breaks) - 30.0 / g_min, max(params.breaks) + 30.0 / params.eta, n)
    t = np.sort(np.concatenate([t, np.array(params.breaks)]))
    return min(float(np.min(u.value(t) - l.value(t))) for u, l in zip(up, lo))


# ------------------------------------------------------------------ search

def _assemble(k, cert_eps, gs, gl, eta, big_m, p, wp):
    breaks = _breaks(k, cert_eps, gs, gl, eta, big_m)
    cert = solcond_certificate(p, wp, cert_eps, eta)
    return ProfileParameters(cert, breaks, eta, big_m, gs, gl, k)


def _try_assemble(p, wp, k, cert_eps, gs, gl, eta, big_m):
    try:
        params = _assemble(k, cert_eps, gs, gl, eta, big_m, p, wp)
    except BreakNotFound:
        return None
    return params if params.certificate.ok else None


def _case_flags(p, wp, params, n):
    res = check_cases(p, wp, params, SUPER, n=n) + check_cases(p, wp, params, SUB, n=n)
    return {(c.side, c.equation, c.case): c.ok for c in res}


def find_parameters(p: SirParameters, wp: WaveFrameParameters, roots=None, n=1000,
                    theta=0.25, bisect_steps=30, max_doublings=40):
    """Amplitudes, breaks, tail rate and lower divisor for the two triples.

    The tail rate is bounded first by feasibility of the tail inequalities;
    amplitudes are then fixed at half that bound. The divisor starts at
    ``2 max(M_i / k_i)`` and doubles until every case holds for a tiny rate,
    after which each case's largest admissible rate is found by bisection.
    """
    if roots is None:
        roots = compute_roots(p, wp.M, (wp.r1, wp.r2, wp.r3))
    eta_of = {rec.label: rec.eta for rec in roots}
    k = wp.k
    eta_cap = 0.5 * tail_rate_limit(p, wp, theta)
    cert_eps = solve_amplitudes(p, wp, eta_cap, theta)
    gs = (eta_of["P3"],) * 3
    gl = (eta_of["P2"], eta_of["P4"], eta_of["P6"])

    def flags_at(eta, big_m):
        params = _try_assemble(p, wp, k, cert_eps, gs, gl, eta, big_m)
        if params is None:
            return None, None
        return params, _case_flags(p, wp, params, n)

    def all_ok(params, flags):
        return flags is not None and all(flags.values()) and ordering_gap(params) >= -1e-12

    eta_lo = 1e-3 * eta_cap
    big_m = 2.0 * max(m / kk for m, kk in zip(wp.M, k))
    for _ in range(max_doublings):
        params_lo, flags_lo = flags_at(eta_lo, big_m)
        if all_ok(params_lo, flags_lo):
            break
        big_m *= 2.0
    else:
        failing = sorted(key for key, ok in (flags_lo or {}).items() if not ok)
        raise InfeasibleSolcond(f"no divisor makes every case hold; failing {failing}", line=0)
    eta_star = {}
    _, flags_cap = flags_at(eta_cap, big_m)
    for key in flags_lo:
        if flags_cap is not None and flags_cap[key]:
            eta_star[key] = eta_cap
            continue
        a, b = eta_lo, eta_cap
        for _ in range(bisect_steps):
            mid = math.sqrt(a * b)
            _, fl = flags_at(mid, big_m)
            a, b = (mid, b) if fl is not None and fl[key] else (a, mid)
        eta_star[key] = a
    eta = 0.5 * min(eta_star.values())
    while True:
        params, flags = flags_at(eta, big_m)
        if all_ok(params, flags):
            break
        eta *= 0.5
        if eta < eta_lo:
            params, flags = params_lo, flags_lo
            break
    params.eta_star = {f"{s}{e}.{c}": v for (s, e, c), v in eta_star.items()}
    return params


def classify_breaks(profiles, tol1=1e-6, tol2=1e-6):
    """Lowest smoothness class of analytic profiles from one-sided derivatives."""
    jump1 = max(abs(np.subtract(*pr.one_sided(pr.break_t, 1))) for pr in profiles)
    jump2 = max(abs(np.subtract(*pr.one_sided(pr.break_t, 2))) for pr in profiles)
    side = profiles[0].side
    if jump1 > tol1:
        return side, jump1, jump2
    if jump2 > tol2:
        return "quasi", jump1, jump2
    return "smooth", jump1, jump2


def sampled_jumps(fn: ProfileFunction, t0, n=10, degree=5):
    """Jumps of the first and second derivative of samples across ``t0``.

    Each side gets its own polynomial fit through the ``n`` nearest samples
    strictly on that side, so a kink at ``t0`` is never straddled.
    """
    t = fn.grid.t
    derivs = []
    for side in (-1.0, 1.0):
        idx = np.nonzero(side * (t - t0) > 0)[0]
        idx = idx[np.argsort(np.abs(t[idx] - t0))][:n]
        coef = np.polynomial.polynomial.polyfit(t[idx] - t0, fn.values[idx], degree)
        derivs.append((coef[1], 2.0 * coef[2]))
    return abs(derivs[0][0] - derivs[1][0]), abs(derivs[0][1] - derivs[1][1])


def check_quasi_and_smooth(triple: ProfileTriple, breaks, side=SUPER, tol1=1e-6, tol2=1e-6):
    """Lowest smoothness class of a sampled triple at the given break points.

    Returns ``(class, jump1, jump2)`` where the class is ``side`` when the
    first derivative jumps, ``"quasi"`` when only the second does and
    ``"smooth"`` otherwise.
    """
    j1 = j2 = 0.0
    for fn, b in zip(triple, breaks):
        a, c = sampled_jumps(fn, b)
        j1, j2 = max(j1, a), max(j2, c)
    if j1 > tol1:
        return side, j1, j2
    if j2 > tol2:
        return "quasi", j1, j2
    return "smooth", j1, j2


@dataclass
class SmoothingChain:
    classes: tuple
    jump1: tuple
    jump2: tuple

    def as_json(self):
        return {"classes": list(self.classes), "jump1": [float(x) for x in self.jump1],
                "jump2": [float(x) for x in self.jump2]}


def smoothing_chain(p: SirParameters, wp: WaveFrameParameters, params: ProfileParameters,
                    half_width=20.0, h=0.0025, tol1=1e-6, tol2=1e-6):
    """Smoothness class of the upper triple, of its image and of the second image.

    The map is applied on a fine window grid around the breaks; the lower
    triple supplies the cross terms, as in the iteration.
    """
    from .iteration import apply_F, build_kernels

    n = int(round(2 * half_width / h)) | 1
    grid = Grid.symmetric(half_width, n)
    kernels = build_kernels(p, wp, grid)
    upper = sample_triple(build_super(params), grid)
    lower = sample_triple(build_sub(params), grid)
    first_breaks = params.breaks[:3]
    chain = [check_quasi_and_smooth(upper, first_breaks, SUPER, tol1, tol2)]
    up1 = apply_F(upper, kernels, p, wp, cross=lower, check=False)
    lo1 = apply_F(lower, kernels, p, wp, cross=upper, check=False)
    chain.append(check_quasi_and_smooth(up1, first_breaks, SUPER, tol1, tol2))
    up2 = apply_F(up1, kernels, p, wp, cross=lo1, check=False)
    chain.append(check_quasi_and_smooth(up2, first_breaks, SUPER, tol1, tol2))
    return SmoothingChain(*zip(*chain))
