"""Bounded Green's kernel of ``x'' - a x'(t+r) - b x(t+r)`` and convolution with it.

The kernel is the inverse Fourier transform of ``1/Delta(i eta)`` where
``Delta(z) = z^2 - (a z + b) e^{rz}``. Two reference terms with known
transforms are subtracted before the FFT so the remainder decays like
``eta^-4``; the references are added back exactly on the output grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .charroots import GeneralChar, imaginary_axis_clear
from .errors import CertificateFailed, FitFailed, GridMismatch, NoCertificate, QuadratureStalled
from .grid import Grid, ProfileFunction

# Derivative jump of the kernel at xi = 0 (the operator is monic).
_JUMP = 1.0


def green_closed_form_r0(a, b, xi):
    if a == 0 or not b > 0:
        raise ValueError("need a != 0 and b > 0")
    s = math.sqrt(a * a + 4.0 * b)
    lam_m, lam_p = (a - s) / 2.0, (a + s) / 2.0
    amp = 1.0 / (lam_m - lam_p)
    xi = np.asarray(xi, dtype=float)
    out = np.where(xi >= 0, amp * np.exp(lam_m * np.maximum(xi, 0.0)),
                   amp * np.exp(lam_p * np.minimum(xi, 0.0)))
    return float(out) if out.ndim == 0 else out


@dataclass
class GreenKernel:
    a: float
    b: float
    r: float
    grid: Grid
    values: np.ndarray
    K: float
    alpha: float
    tail_estimate: float
    oversample: int
    left_rate: float
    right_rate: float

    @property
    def xi(self):
        return self.grid.t

    @property
    def h(self):
        return self.grid.h

    @property
    def half_steps(self):
        return (self.grid.n - 1) // 2

    def left_tail(self):
        """Integral of G beyond the left end of the grid."""
        return float(self.values[0]) / self.left_rate

    def right_tail(self):
        return float(self.values[-1]) / self.right_rate

    def cumulative(self):
        """``C(xi_j) = int_{-inf}^{xi_j} G`` by trapezoid, kink not corrected."""
        v = self.values
        c = np.empty_like(v)
        c[0] = 0.0
        np.cumsum(0.5 * self.h * (v[1:] + v[:-1]), out=c[1:])
        return c + self.left_tail()

    def mass(self):
        """Total integral, with the Euler-Maclaurin term for the kink at 0."""
        return float(self.cumulative()[-1] + self.right_tail() + _JUMP * self.h ** 2 / 12.0)

    def mass_defect(self):
        return abs(self.mass() + 1.0 / self.b)


def _reference(a, kappa, r, xi):
    """Transform of ``-1/(eta^2+kappa^2) + i a eta e^{i r eta}/(eta^2+kappa^2)^2``."""
    xr = xi + r
    return (-np.exp(-kappa * np.abs(xi)) / (2.0 * kappa)
            - a * xr * np.exp(-kappa * np.abs(xr)) / (4.0 * kappa))


def _reference_symbol(a, kappa, r, eta):
    d = eta * eta + kappa * kappa
    return -1.0 / d + 1j * a * eta * np.exp(1j * r * eta) / (d * d)


def _edge_rate(outer, inner, h):
    """Exponential rate from the two outermost samples, for the tail integral."""
    if outer == 0.0 or inner == 0.0 or (outer > 0) != (inner > 0):
        return math.inf
    ratio = inner / outer
    return math.log(ratio) / h if ratio > 1.0 else math.inf


def _flush_roundoff(values, rel=1e-13):
    """Zero the samples beyond the outermost one above ``rel * peak`` on each side.

    Out there the FFT leaves only round-off, which no exponential envelope
    with the true decay rate can cover.
    """
    mag = np.abs(values)
    big = np.nonzero(mag >= rel * mag.max())[0]
    out = values.copy()
    out[: big[0]] = 0.0
    out[big[-1] + 1:] = 0.0
    return out


def green_numeric(a, b, r, grid: Grid, tol=1e-8, max_oversample=64, max_points=1 << 23):
    """Sample the kernel on ``grid``, which must be symmetric with a node at 0."""
    try:
        gc = GeneralChar(a, b, r)
        imaginary_axis_clear(gc)
    except (CertificateFailed, ValueError) as exc:
        raise NoCertificate(str(exc)) from exc
    half = (grid.n - 1) // 2
    if grid.n % 2 != 1 or abs(grid.t0 + half * grid.h) > 1e-9 * grid.h:
        raise GridMismatch("kernel grid must be symmetric about 0 with odd size")
    h = grid.h
    lam_m, lam_p = gc.quadratic_roots()
    slow = min(-lam_m, lam_p)
    margin = 40.0 / slow
    span = half * h
    kappa = 1.0 + math.sqrt(b) + abs(a)
    cutoff_floor = max(64.0, 32.0 * (1.0 + math.sqrt(b)))
    ov = 1
    while True:
        hf = h / ov
        H = math.pi / hf
        if H >= cutoff_floor:
            n_fft = 1 << int(math.ceil(math.log2(2.0 * (span + margin) / hf)))
            if n_fft > max_points:
                raise QuadratureStalled(f"FFT size {n_fft} exceeds {max_points}")
            eta = 2.0 * math.pi * np.fft.fftfreq(n_fft, d=hf)
            z = 1j * eta
            rem = 1.0 / gc(z) - _reference_symbol(a, kappa, r, eta)
            band = np.abs(eta) >= 0.5 * H
            coef = float(np.max(np.abs(rem[band]) * eta[band] ** 4))
            tail = coef / (3.0 * math.pi * H ** 3)
            if tail <= tol or ov >= max_oversample:
                break
        ov *= 2
    if tail > tol:
        raise QuadratureStalled(f"tail estimate {tail:.2e} > {tol:.1e} at H={H:.1f}")
    nyq = n_fft // 2
    rem[nyq] = rem[nyq].real
    fine = np.fft.ifft(rem).real / hf
    idx = (np.arange(-half, half + 1) * ov) % n_fft
    xi = np.arange(-half, half + 1) * h
    values = _flush_roundoff(fine[idx] + _reference(a, kappa, r, xi))
    left_rate = _edge_rate(values[0], values[1], h)
    right_rate = _edge_rate(values[-1], values[-2], h)
    k = GreenKernel(a, b, r, Grid(-span, h, 2 * half + 1), values, math.nan, math.nan,
                    tail, ov, left_rate, right_rate)
    k.K, k.alpha = decay_fit(k)
    return k


def kernel_for(a, b, r, profile_grid: Grid, **kw):
    """Kernel wide enough to convolve any profile on ``profile_grid``."""
    m = profile_grid.n - 1
    return green_numeric(a, b, r, Grid(-m * profile_grid.h, profile_grid.h, 2 * m + 1), **kw)


def _side_rate(dist, mags, peak):
    keep = (mags < 1e-2 * peak) & (mags > 1e-12 * peak) & (dist > 0)
    if keep.sum() < 16:
        raise FitFailed(f"only {int(keep.sum())} usable tail samples")
    slope, _ = np.polyfit(dist[keep], np.log(mags[keep]), 1)
    return -slope, keep


def decay_fit(k: GreenKernel):
    """Envelope ``K e^{-alpha |xi|}`` covering every sample."""
    xi, g = k.xi, np.abs(k.values)
    peak = float(g.max())
    if peak == 0.0:
        raise FitFailed("kernel vanishes")
    left, right = xi < 0, xi > 0
    a_l, keep_l = _side_rate(-xi[left], g[left], peak)
    a_r, keep_r = _side_rate(xi[right], g[right], peak)
    alpha = min(a_l, a_r)
    if not alpha > 0:
        raise FitFailed(f"non-positive fitted rate {alpha:.3e}")
    dist = np.abs(xi)
    fit_region = np.zeros_like(g, dtype=bool)
    fit_region[left] = keep_l
    fit_region[right] = keep_r
    k_fit = float(np.max(g[fit_region] * np.exp(alpha * dist[fit_region])))
    # Samples at round-off level far out would otherwise blow K up; lower alpha instead.
    target = 4.0 * max(k_fit, peak)
    far = (dist > 0) & (g > 0)
    alpha = min(alpha, float(np.min(np.log(target / g[far]) / dist[far])))
    K = float(np.max(g * np.exp(alpha * dist))) * (1.0 + 1e-12)
    return K, alpha


def convolve(k: GreenKernel, prof: ProfileFunction) -> ProfileFunction:
    """``(G * h)`` on the profile grid; tails contribute ``h(+-inf) * int G``."""
    g = prof.grid
    n = g.n
    if abs(g.h - k.h) > 1e-12 * k.h:
        raise GridMismatch(f"kernel spacing {k.h} != profile spacing {g.h}")
    if k.half_steps < n - 1:
        raise GridMismatch("kernel grid narrower than the profile span")
    c = k.half_steps
    sub = slice(c - (n - 1), c + n)
    kv = k.values[sub]
    w = prof.values.copy()
    w[0] *= 0.5
    w[-1] *= 0.5
    inner = fftconvolve(kv, w)[n - 1: 2 * n - 1] * g.h
    cum = k.cumulative()
    mass_t = cum[-1] + k.right_tail()
    i = np.arange(n)
    # t_i - t0 = i h and t_i - t_end = (i - n + 1) h, as kernel indices.
    c_from_start = cum[c + i]
    c_from_end = cum[c + i - (n - 1)]
    tails = prof.left * (mass_t - c_from_start) + prof.right * c_from_end
    # The local correction is sized so that constants reproduce the exact
    # mass -1/b; it absorbs the Euler-Maclaurin terms of the kinks near 0.
    exact = -1.0 / k.b
    local = (exact - mass_t) * prof.values
    out = inner + tails + local
    return ProfileFunction(g, out, exact * prof.left, exact * prof.right)


def linear_defect(a, b, r, x: ProfileFunction, f: ProfileFunction, interior=None):
    """Sup of ``x'' - a x'(t+r) - b x(t+r) - f`` by fourth-order centred differences."""
    g = x.grid
    h = g.h
    if interior is None:
        interior = slice(3, g.n - 3)
    v = x.values
    d2 = np.zeros(g.n)
    d2[2:-2] = (-v[4:] + 16 * v[3:-1] - 30 * v[2:-2] + 16 * v[1:-3] - v[:-4]) / (12 * h * h)
    s = g.t + r
    d1 = (-x(s + 2 * h) + 8 * x(s + h) - 8 * x(s - h) + x(s - 2 * h)) / (12 * h)
    res = d2 - a * d1 - b * x(s) - f.values
    return float(np.max(np.abs(res[interior])))


def solve_linear_fde(a, b, r, f: ProfileFunction, kernel: GreenKernel | None = None):
    if kernel is None:
        kernel = kernel_for(a, b, r, f.grid)
    return convolve(kernel, f)
