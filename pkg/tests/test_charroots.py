import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sirwave.charroots import (
    ExpCharPolynomial, GeneralChar, QuadraticChar, characteristic_family, check_root_ordering,
    compute_roots, continue_root, imaginary_axis_clear, quadratic_roots, smallest_positive_root,
    strip_root_count,
)
from sirwave.errors import BoundaryRoot, ComplexRoots, NoPositiveRoot


def bisect(fn, lo, hi, n=200):
    flo = fn(lo)
    for _ in range(n):
        mid = 0.5 * (lo + hi)
        if (fn(mid) < 0) == (flo < 0):
            lo, flo = mid, fn(mid)
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("c, q, expect", [
    (2.0, -1.0, 1.0 + math.sqrt(2.0)),
    (3.0, 2.0, 1.0),
    (2.0, 0.0, 2.0),
])
def test_smallest_positive_root_examples(c, q, expect):
    assert smallest_positive_root(QuadraticChar(c, q)) == pytest.approx(expect, abs=1e-14)


def test_quadratic_errors():
    with pytest.raises(ComplexRoots):
        quadratic_roots(QuadraticChar(1.0, 1.0))
    with pytest.raises(NoPositiveRoot):
        smallest_positive_root(QuadraticChar(-3.0, 2.0))


@settings(max_examples=200, deadline=None)
@given(c=st.floats(0.1, 20), q=st.floats(-50, 50))
def test_quadratic_roots_solve_the_quadratic(c, q):
    pq = QuadraticChar(c, q)
    if pq.discriminant < 0:
        return
    scale = max(1.0, c * c, abs(q))
    for lam in quadratic_roots(pq):
        assert abs(pq(lam)) <= 1e-12 * scale


def test_continue_root_at_zero_delay_returns_seed():
    seed = 1.0 + math.sqrt(2.0)
    assert continue_root(ExpCharPolynomial(2.0, -1.0, 0.0), seed) == seed


def test_continue_root_matches_bisection():
    ec = ExpCharPolynomial(2.0, -1.0, 0.01)
    eta, trace = continue_root(ec, 1.0 + math.sqrt(2.0), return_trace=True)
    assert abs(ec(eta)) < 1e-12
    assert abs(eta - (1 + math.sqrt(2.0))) < 0.1
    assert eta == pytest.approx(bisect(lambda x: float(ec(x)), 2.0, 3.0), abs=1e-12)
    assert all(r < 1e-12 for r in trace.final_residual)
    assert np.all(np.diff(trace.r) > 0)


def test_six_roots_continue_from_quadratics(demo):
    p, wp = demo
    for rec in compute_roots(p, wp.M, wp.r):
        assert rec.residual < 1e-12
    for ec in characteristic_family(p, wp.M, (0.0, 0.0, 0.0)):
        lam = smallest_positive_root(ec.quadratic())
        assert continue_root(ec, lam) == lam


def test_root_gap_shrinks_linearly_with_delay(demo):
    p, wp = demo
    gaps = []
    for r in (0.04, 0.02, 0.01):
        recs = compute_roots(p, wp.M, (r, r, r))
        gaps.append([abs(x.eta - x.lam) for x in recs])
    gaps = np.array(gaps)
    ratios = gaps[:-1] / gaps[1:]
    assert np.all(np.abs(ratios - 2.0) <= 0.4)


def test_root_ordering_within_pairs(demo):
    p, wp = demo
    assert all(check_root_ordering(compute_roots(p, wp.M, wp.r)).values())


def test_axis_certificate_minimum_modulus():
    cert = imaginary_axis_clear(GeneralChar(1.0, 1.0, 0.0))
    # |eta^2 + 1 + i eta|^2 = eta^4 + 3 eta^2 + 1, minimised at eta = 0.
    assert cert.min_modulus == pytest.approx(1.0, abs=1e-9)
    assert cert.lower_bound > math.sqrt(0.75) - 0.1


def test_axis_certificate_with_delay_against_dense_scan():
    gc = GeneralChar(1.0, 2.0, 0.05)
    cert = imaginary_axis_clear(gc)
    eta = np.linspace(-cert.H, cert.H, 1_000_001)
    dense = float(np.min(np.abs(gc(1j * eta))))
    assert 0 < cert.lower_bound <= dense
    assert cert.min_modulus == pytest.approx(dense, rel=1e-3)


def test_axis_tail_bound():
    gc = GeneralChar(1.0, 2.0, 0.05)
    cert = imaginary_axis_clear(gc)
    eta = cert.H * np.linspace(1.0, 50.0, 2000)
    assert np.all(np.abs(gc(1j * eta)) >= 0.5 * eta ** 2)


def test_strip_counts_at_zero_delay():
    gc = GeneralChar(1.0, 1.0, 0.0)
    lam_m, lam_p = gc.quadratic_roots()
    assert strip_root_count(gc, (0.0 + 1e-3, 2 * lam_p)) == 1
    assert strip_root_count(gc, (4 * lam_m, 2 * lam_m)) == 0
    assert strip_root_count(gc, (2 * lam_m, 2 * lam_p)) == 2


def test_strip_count_with_delay_matches_multistart():
    gc = GeneralChar(1.0, 1.0, 0.02)
    lam_p = gc.quadratic_roots()[1]
    strip = (1e-3, 2 * lam_p)
    assert strip_root_count(gc, strip) == 1
    found = set()
    for x0 in np.linspace(strip[0], strip[1], 9):
        for y0 in np.linspace(-6, 6, 9):
            z = complex(x0, y0)
            for _ in range(60):
                d = complex(gc.derivative(z))
                if d == 0:
                    break
                z -= complex(gc(z)) / d
            if abs(complex(gc(z))) < 1e-10 and strip[0] <= z.real <= strip[1]:
                found.add((round(z.real, 8), round(z.imag, 8)))
    assert len(found) == 1


def test_strip_count_stable_under_small_perturbation():
    gc = GeneralChar(1.0, 1.0, 0.02)
    lam_p = gc.quadratic_roots()[1]
    counts = {strip_root_count(gc, (1e-3 + d, 2 * lam_p + d)) for d in (-1e-3, 0.0, 1e-3)}
    assert counts == {1}


def test_strip_count_refuses_root_on_contour():
    gc = GeneralChar(1.0, 1.0, 0.0)
    lam_p = gc.quadratic_roots()[1]
    with pytest.raises(BoundaryRoot):
        strip_root_count(gc, (lam_p, 2 * lam_p))
