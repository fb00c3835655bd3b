"""Characteristic roots: quadratics, their delayed continuations, and
imaginary-axis / strip certificates for the mixed-type kernel equation.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (BoundaryRoot, CertificateFailed, ComplexRoots,
                     ContinuationFailed, NoPositiveRoot)
from .model import SirParameters, char_constants

LABELS = ("P1", "P2", "P3", "P4", "P5", "P6")


@dataclass(frozen=True)
class QuadraticChar:
    """``lambda^2 - c lambda + q``."""
    c: float
    q: float
    label: str = ""

    def __call__(self, lam):
        return lam * lam - self.c * lam + self.q

    @property
    def discriminant(self):
        return self.c * self.c - 4.0 * self.q


@dataclass(frozen=True)
class ExpCharPolynomial:
    """``eta^2 - c eta e^{r eta} + q e^{r eta}``; equals the quadratic at r = 0."""
    c: float
    q: float
    r: float
    label: str = ""

    def __call__(self, eta):
        e = np.exp(self.r * eta)
        return eta * eta - self.c * eta * e + self.q * e

    def derivative(self, eta):
        e = np.exp(self.r * eta)
        return 2.0 * eta - self.c * e - self.c * self.r * eta * e + self.q * self.r * e

    def quadratic(self):
        return QuadraticChar(self.c, self.q, self.label)

    def at(self, r):
        return ExpCharPolynomial(self.c, self.q, r, self.label)


@dataclass(frozen=True)
class GeneralChar:
    """Symbol ``z^2 - a z e^{rz} - b e^{rz}`` of ``x'' - a x'(t+r) - b x(t+r)``."""
    a: float
    b: float
    r: float = 0.0

    def __post_init__(self):
        if self.a == 0:
            raise ValueError("a must be nonzero")
        if not self.b > 0:
            raise ValueError("b must be positive")

    def __call__(self, z):
        e = np.exp(self.r * z)
        return z * z - (self.a * z + self.b) * e

    def derivative(self, z):
        e = np.exp(self.r * z)
        return 2.0 * z - self.a * e - self.r * (self.a * z + self.b) * e

    def quadratic_roots(self):
        """Roots ``(lambda_minus, lambda_plus)`` of the undelayed symbol."""
        s = math.sqrt(self.a * self.a + 4.0 * self.b)
        return ((self.a - s) / 2.0, (self.a + s) / 2.0)


def quadratic_roots(pq: QuadraticChar):
    """Both real roots, ascending, by the cancellation-free formula."""
    disc = pq.discriminant
    if disc < 0:
        raise ComplexRoots(f"{pq.label or 'quadratic'}: discriminant {disc:.3e} < 0")
    sq = math.sqrt(disc)
    big = (pq.c + math.copysign(sq, pq.c)) / 2.0 if pq.c != 0 else sq / 2.0
    if big == 0.0:
        return (0.0, 0.0)
    small = pq.q / big
    return tuple(sorted((big, small)))


def smallest_positive_root(pq: QuadraticChar) -> float:
    roots = [x for x in quadratic_roots(pq) if x > 0]
    if not roots:
        raise NoPositiveRoot(f"{pq.label or 'quadratic'} has no positive root")
    return min(roots)


@dataclass
class ContinuationTrace:
    r: list = field(default_factory=list)
    eta: list = field(default_factory=list)
    start_residual: list = field(default_factory=list)
    final_residual: list = field(default_factory=list)


def _newton(f, df, x0, tol, maxit=50):
    x = x0
    for _ in range(maxit):
        fx = f(x)
        if abs(fx) < tol:
            return x, abs(fx)
        d = df(x)
        if not math.isfinite(d) or abs(d) < 1e-14:
            return None, abs(fx)
        step = fx / d
        x = x - step
        if not math.isfinite(x):
            return None, math.inf
        if abs(step) < 1e-16 * max(1.0, abs(x)):
            fx = f(x)
            return (x, abs(fx)) if abs(fx) < tol else (None, abs(fx))
    fx = f(x)
    return (x, abs(fx)) if abs(fx) < tol else (None, abs(fx))


def continue_root(ec: ExpCharPolynomial, seed: float, tol=1e-12, return_trace=False):
    """Follow the real root from ``r = 0`` (where it is ``seed``) to ``ec.r``.

    Substeps are at most ``0.01 (1 + |r|)`` and are halved whenever Newton does
    not reach ``tol``. A root pair that collides and leaves the real axis shows
    up as Newton failure and raises :class:`ContinuationFailed`.
    """
    trace = ContinuationTrace()
    eta = float(seed)
    trace.r.append(0.0)
    trace.eta.append(eta)
    res0 = abs(float(ec.at(0.0)(eta)))
    trace.start_residual.append(res0)
    trace.final_residual.append(res0)
    target = float(ec.r)
    r_now = 0.0
    if target != 0.0:
        h_max = 0.01 * (1.0 + abs(target))
        h = min(h_max, abs(target))
        sign = 1.0 if target > 0 else -1.0
        while abs(target - r_now) > 0:
            h = min(h, abs(target - r_now))
            r_next = r_now + sign * h
            if abs(target - r_next) < 1e-15 * max(1.0, abs(target)):
                r_next = target
            poly = ec.at(r_next)
            start = abs(float(poly(eta)))
            x, res = _newton(lambda v: float(poly(v)), lambda v: float(poly.derivative(v)), eta, tol)
            if x is None or abs(x - eta) > 0.5 * (1.0 + abs(eta)):
                h /= 2.0
                if h < 1e-12:
                    raise ContinuationFailed(f"{ec.label or 'root'}: Newton failed", r_now, eta)
                continue
            eta, r_now = x, r_next
            trace.r.append(r_now)
            trace.eta.append(eta)
            trace.start_residual.append(start)
            trace.final_residual.append(res)
            h = min(2.0 * h, h_max)
    residual = abs(float(ec(eta)))
    if residual >= tol:
        x, residual = _newton(lambda v: float(ec(v)), lambda v: float(ec.derivative(v)), eta, tol)
        if x is None:
            raise ContinuationFailed(f"{ec.label or 'root'}: final residual {residual:.2e}", r_now, eta)
        eta = x
    return (eta, trace) if return_trace else eta


# ------------------------------------------------------------ six-root set

@dataclass(frozen=True)
class RootRecord:
    label: str
    lam: float
    eta: float
    r: float
    residual: float


def characteristic_family(p: SirParameters, M, r=None):
    """The six delayed polynomials, normalised by the matching diffusion.

    ``r`` defaults to ``(c tau1, c tau2, c tau3)``.
    """
    if r is None:
        r = (p.c * p.tau1, p.c * p.tau2, p.c * p.tau3)
    qs = char_constants(p, M)
    diff = (p.D_S, p.D_S, p.D_I, p.D_I, p.D_R, p.D_R)
    delays = (r[0], r[0], r[1], r[1], r[2], r[2])
    return [ExpCharPolynomial(p.c / d, q / d, rr, lab)
            for lab, q, d, rr in zip(LABELS, qs, diff, delays)]


def compute_roots(p: SirParameters, M, r=None):
    out = []
    for ec in characteristic_family(p, M, r):
        lam = smallest_positive_root(ec.quadratic())
        eta = continue_root(ec, lam)
        out.append(RootRecord(ec.label, lam, eta, ec.r, abs(float(ec(eta)))))
    return out


def check_root_ordering(records):
    """The three pairwise orderings lambda_1 < lambda_2 etc., continued too."""
    by = {rec.label: rec for rec in records}
    pairs = (("P1", "P2"), ("P3", "P4"), ("P5", "P6"))
    return {f"{a}<{b}": (by[a].lam < by[b].lam and by[a].eta < by[b].eta) for a, b in pairs}


# ------------------------------------------------- imaginary axis / strips

@dataclass(frozen=True)
class AxisCertificate:
    a: float
    b: float
    r: float
    H: float
    spacing: float
    min_modulus: float
    argmin: float
    lipschitz: float
    lower_bound: float


def imaginary_axis_clear(gc: GeneralChar) -> AxisCertificate:
    """Certify ``|Delta(i eta)| > 0`` for all real ``eta``.

    On ``|eta| <= H`` a uniform grid plus a Lipschitz bound gives a rigorous
    lower bound; beyond ``H`` the quadratic term gives ``|Delta| >= eta^2/2``.
    """
    a, b, r = gc.a, gc.b, gc.r
    H = 4.0 * max(1.0, abs(a), math.sqrt(b))
    # Make the tail bound hold: sqrt(a^2 H^2 + b^2) <= H^2 / 2.
    while math.hypot(a * H, b) > 0.5 * H * H:
        H *= 2.0
    spacing = 1e-3 * (1.0 + b / abs(a))
    spacing = min(spacing, 1e-3)
    n = int(math.ceil(2 * H / spacing)) + 1
    eta = np.linspace(-H, H, n)
    h = eta[1] - eta[0]
    mod = np.abs(gc(1j * eta))
    j = int(np.argmin(mod))
    lip = 2.0 * H + abs(a) + abs(a) * H * abs(r) + b * abs(r)
    lower = float(mod[j] - lip * h / 2.0)
    cert = AxisCertificate(a, b, r, H, h, float(mod[j]), float(eta[j]), lip, lower)
    if lower <= 0:
        raise CertificateFailed(
            f"|Delta(i eta)| lower bound {lower:.3e} <= 0 near eta={eta[j]:.4f}",
            eta=float(eta[j]), modulus=float(mod[j]))
    return cert


def _rectangle_height(gc: GeneralChar, x0, x1):
    xmax = max(abs(x0), abs(x1))
    grow = math.exp(abs(gc.r) * xmax)
    Y = 4.0 * max(1.0, abs(gc.a) * grow, math.sqrt(gc.b * grow), xmax)
    # On |Im z| >= Y the quadratic term dominates.
    while Y * Y <= 2.0 * (abs(gc.a) * math.hypot(xmax, Y) + gc.b) * grow:
        Y *= 2.0
    return Y


def _arg_change(f, z0, z1, depth=0, max_depth=40):
    w0, w1 = f(z0), f(z1)
    if w0 == 0 or w1 == 0:
        return 0.0, 0.0
    d = cmath.phase(w1 / w0)
    if abs(d) < math.pi / 8 or depth >= max_depth:
        return d, min(abs(w0), abs(w1))
    zm = 0.5 * (z0 + z1)
    d0, m0 = _arg_change(f, z0, zm, depth + 1, max_depth)
    d1, m1 = _arg_change(f, zm, z1, depth + 1, max_depth)
    return d0 + d1, min(m0, m1)


def strip_root_count(gc: GeneralChar, strip, tol=1e-10, n_base=400):
    """Number of roots of ``gc`` with ``x0 <= Re z <= x1``.

    ``strip`` is ``(x0, x1)`` or ``(x0, x1, y)``; without ``y`` the height is
    chosen so that no root can lie above it. The count is the winding number
    of the boundary image, tracked with adaptive bisection of each edge.
    """
    if len(strip) == 2:
        x0, x1 = strip
        Y = _rectangle_height(gc, x0, x1)
    else:
        x0, x1, Y = strip
    corners = [complex(x0, -Y), complex(x1, -Y), complex(x1, Y), complex(x0, Y)]
    f = lambda z: complex(gc(z))
    total = 0.0
    min_mod = math.inf
    for k in range(4):
        za, zb = corners[k], corners[(k + 1) % 4]
        pts = [za + (zb - za) * s for s in np.linspace(0.0, 1.0, n_base + 1)]
        for z0, z1 in zip(pts[:-1], pts[1:]):
            d, m = _arg_change(f, z0, z1)
            total += d
            min_mod = min(min_mod, m)
    if min_mod < tol:
        raise BoundaryRoot(f"|Delta| = {min_mod:.3e} on the contour")
    return int(round(total / (2.0 * math.pi)))
