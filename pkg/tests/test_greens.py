import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sirwave.errors import GridMismatch, NoCertificate
from sirwave.greens import (
    convolve, decay_fit, green_closed_form_r0, green_numeric, kernel_for, linear_defect,
    solve_linear_fde,
)
from sirwave.grid import Grid, ProfileFunction

KGRID = Grid.symmetric(30.0, 6001)
PGRID = Grid.symmetric(15.0, 3001)


@pytest.fixture(scope="module")
def k23():
    return green_numeric(2.0, 3.0, 0.0, KGRID)


def test_closed_form_examples():
    assert green_closed_form_r0(2.0, 3.0, 0.0) == pytest.approx(-0.25, abs=1e-15)
    assert abs(green_closed_form_r0(2.0, 3.0, 200.0)) < 1e-80
    assert abs(green_closed_form_r0(2.0, 3.0, -200.0)) < 1e-80


def test_closed_form_mass_by_quadrature():
    xi = np.linspace(-40, 40, 800001)
    g = green_closed_form_r0(2.0, 3.0, xi)
    assert np.trapezoid(g, xi) == pytest.approx(-1.0 / 3.0, abs=1e-8)


def test_closed_form_derivative_jump_is_one():
    h = 1e-7
    right = (green_closed_form_r0(2.0, 3.0, 2 * h) - green_closed_form_r0(2.0, 3.0, h)) / h
    left = (green_closed_form_r0(2.0, 3.0, -h) - green_closed_form_r0(2.0, 3.0, -2 * h)) / h
    assert right - left == pytest.approx(1.0, abs=1e-5)


def test_numeric_kernel_matches_closed_form(k23):
    inner = np.abs(k23.xi) <= 10.0
    err = np.max(np.abs(k23.values[inner] - green_closed_form_r0(2.0, 3.0, k23.xi[inner])))
    assert err < 1e-6


@pytest.mark.parametrize("r", [0.0, 0.01, 0.02, 0.05])
def test_mass_identity(r):
    k = green_numeric(2.0, 3.0, r, KGRID)
    assert k.mass() == pytest.approx(-1.0 / 3.0, abs=1e-6)


@pytest.mark.parametrize("r", [0.0, 0.01, 0.05])
def test_sign_and_envelope(r):
    k = green_numeric(2.0, 3.0, r, KGRID)
    assert np.max(k.values) <= 1e-8
    env = k.K * np.exp(-k.alpha * np.abs(k.xi))
    assert np.all(np.abs(k.values) <= env)
    assert abs(k.values[0]) < 1e-8 * np.max(np.abs(k.values))


def test_fitted_rate_near_slow_root(k23):
    assert k23.alpha == pytest.approx(1.0, rel=0.05)


def test_mirrored_operator_keeps_rate(k23):
    mirrored = green_numeric(-2.0, 3.0, 0.0, KGRID)
    assert np.allclose(mirrored.values, k23.values[::-1], atol=1e-9)
    assert mirrored.alpha == pytest.approx(k23.alpha, rel=1e-6)


def test_scaled_kernel_doubles_constant(k23):
    doubled = dataclasses.replace(k23, values=2.0 * k23.values)
    K, alpha = decay_fit(doubled)
    assert K == pytest.approx(2.0 * k23.K, rel=1e-9)
    assert alpha == pytest.approx(k23.alpha, rel=1e-9)


def test_missing_certificate_rejected():
    with pytest.raises(NoCertificate):
        green_numeric(2.0, -1.0, 0.0, KGRID)


def test_asymmetric_grid_rejected():
    with pytest.raises(GridMismatch):
        green_numeric(2.0, 3.0, 0.0, Grid(-5.0, 0.01, 1000))


# ------------------------------------------------------------ convolution

@pytest.fixture(scope="module")
def kp():
    return kernel_for(2.0, 3.0, 0.02, PGRID)


def test_convolve_zero_and_constant(kp):
    zero = ProfileFunction(PGRID, np.zeros(PGRID.n), 0.0, 0.0)
    assert np.all(convolve(kp, zero).values == 0)
    one = ProfileFunction(PGRID, np.ones(PGRID.n), 1.0, 1.0)
    out = convolve(kp, one)
    assert np.max(np.abs(out.values + 1.0 / 3.0)) < 1e-6
    assert out.left == out.right == pytest.approx(-1.0 / 3.0)


@settings(max_examples=20, deadline=None)
@given(steps=st.integers(-200, 200), width=st.floats(0.5, 3.0))
def test_convolve_translation_equivariant(kp, steps, width):
    t = PGRID.t
    f = ProfileFunction(PGRID, np.exp(-(t / width) ** 2), 0.0, 0.0)
    shifted = ProfileFunction(PGRID, np.exp(-((t - steps * PGRID.h) / width) ** 2), 0.0, 0.0)
    a = convolve(kp, f).values
    b = convolve(kp, shifted).values
    m = abs(steps)
    inner = slice(m + 400, PGRID.n - m - 400)
    moved = np.roll(a, steps)
    assert np.max(np.abs(moved[inner] - b[inner])) < 1e-8


def test_convolve_rejects_spacing_mismatch(kp):
    other = Grid.symmetric(15.0, 1501)
    with pytest.raises(GridMismatch):
        convolve(kp, ProfileFunction(other, np.zeros(other.n)))


# ------------------------------------------------------------ linear solve

def _rhs_cases():
    t = PGRID.t
    bump = np.where(np.abs(t) < 2, np.cos(np.pi * t / 4) ** 4, 0.0)
    step = 0.5 * (1 + np.tanh(t))
    return [
        ("constant", ProfileFunction(PGRID, np.full(PGRID.n, 2.0), 2.0, 2.0)),
        ("bump", ProfileFunction(PGRID, bump, 0.0, 0.0)),
        ("step", ProfileFunction(PGRID, step, 0.0, 1.0)),
    ]


@pytest.mark.parametrize("name, f", _rhs_cases(), ids=[c[0] for c in _rhs_cases()])
def test_linear_solve_defect(kp, name, f):
    x = solve_linear_fde(2.0, 3.0, 0.02, f, kernel=kp)
    scale = 1.0 + np.max(np.abs(f.values))
    assert linear_defect(2.0, 3.0, 0.02, x, f, interior=slice(200, PGRID.n - 200)) < 1e-4 * scale


def test_linear_solve_of_constant_is_constant(kp):
    f = ProfileFunction(PGRID, np.ones(PGRID.n), 1.0, 1.0)
    x = solve_linear_fde(2.0, 3.0, 0.02, f, kernel=kp)
    assert np.allclose(x.values, -1.0 / 3.0, atol=1e-6)
