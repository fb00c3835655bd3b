import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sirwave import profiles as P
from sirwave.bracket import growth_rates, growth_symbol, lower_plateau_cap, plateau_state
from sirwave.errors import BreakNotFound, InfeasibleSolcond
from sirwave.iteration import asymptotics_check
from sirwave.model import wave_frame


@pytest.fixture(scope="module")
def params(demo):
    p, wp = demo
    return P.find_parameters(p, wp)


def test_certificate_residuals_positive(params):
    assert params.certificate.ok
    assert all(r > 0 for r in params.certificate.residuals)


def test_certificate_reproducible_from_stored_amplitudes(demo, params):
    p, wp = demo
    again = P.solcond_certificate(p, wp, params.eps, params.certificate.eta)
    assert again.residuals == pytest.approx(params.certificate.residuals, abs=1e-15)


def test_zero_amplitudes_leave_no_slack(demo):
    p, wp = demo
    cert = P.solcond_certificate(p, wp, (0.0,) * 7)
    assert max(abs(r) for r in cert.residuals) == 0.0
    assert not cert.ok


def test_breaks_solve_continuity(params):
    for pr in P.build_super(params) + P.build_sub(params):
        assert pr.continuity_defect() < 1e-12 * max(1.0, pr.k)


def test_tail_rate_below_every_case_threshold(params):
    assert 0 < params.eta < min(params.eta_star.values())


def test_limits_of_both_triples(params):
    for pr in P.build_super(params) + P.build_sub(params):
        assert pr.value(-400.0) == pytest.approx(0.0, abs=1e-12)
        assert pr.value(1e4) == pytest.approx(pr.k, abs=1e-12)


def test_sampled_triples_meet_asymptotics_on_wide_grid(demo, params):
    from sirwave.grid import Grid

    _, wp = demo
    # The common tail rate is small, so the right end must reach far out.
    right = math.log(1e8) / params.eta
    grid = Grid(-200.0, 0.5, int((right + 200.0) / 0.5) + 1)
    for triple in (P.build_super(params), P.build_sub(params)):
        assert asymptotics_check(P.sample_triple(triple, grid), wp.k).ok


def test_standard_grid_too_narrow_for_slow_tail(demo, params, wave_grid):
    _, wp = demo
    rep = asymptotics_check(P.sample_triple(P.build_super(params), wave_grid), wp.k)
    assert not rep.ok and rep.right_gap > 1e-3


def test_sub_nonnegative_and_below_super(params):
    t = np.linspace(-200, 300, 20001)
    for up, lo in zip(P.build_super(params), P.build_sub(params)):
        assert np.all(lo.value(t) >= 0)
        assert np.all(lo.value(t) <= up.value(t) + 1e-14)
    assert P.ordering_gap(params) >= 0


def test_all_eighteen_case_regions_hold(demo, params):
    p, wp = demo
    res = P.check_super_cases(p, wp, params) + P.check_sub_cases(p, wp, params)
    assert len(res) == 18
    assert all(c.ok for c in res), [c for c in res if not c.ok]


def test_left_region_of_first_equation_cancels(demo, params):
    # Left of every break the susceptible-shift equation is the linear symbol at its root.
    p, wp = demo
    res = P.check_super_cases(p, wp, params)
    first = next(c for c in res if c.equation == 1 and c.case == 1)
    assert first.worst <= 1e-8


def test_infected_lower_case_margin_positive_on_left(demo, params):
    p, wp = demo
    sub = P.check_sub_cases(p, wp, params)
    assert all(c.worst >= 0 for c in sub if c.case == 1)


def test_break_equation_without_crossing_raises():
    with pytest.raises(BreakNotFound):
        P.solve_break(1.0, 0.5, 2.0, 0.1, big_m=4.0, side=P.SUB)


@settings(max_examples=50, deadline=None)
@given(k=st.floats(0.05, 2), growth=st.floats(0.05, 3), frac=st.floats(0.01, 0.9),
       eta=st.floats(0.001, 1))
def test_super_break_is_continuous(k, growth, frac, eta):
    t = P.solve_break(k, growth, frac * k, eta)
    pr = P.PiecewiseExpProfile(k, growth, t, frac * k, eta)
    assert pr.continuity_defect() < 1e-10 * k


def test_infeasible_limits_reported(reference):
    p, M = reference
    wp = wave_frame(p, M)
    with pytest.raises(InfeasibleSolcond) as info:
        P.find_parameters(p, wp)
    assert info.value.line == 1


# ------------------------------------------------------------ smoothness

def test_built_triples_have_derivative_jumps(params):
    assert P.classify_breaks(P.build_super(params))[0] == "super"
    assert P.classify_breaks(P.build_sub(params))[0] == "sub"


def test_map_upgrades_upper_triple(demo, params):
    p, wp = demo
    chain = P.smoothing_chain(p, wp, params)
    assert chain.classes[0] == "super"
    assert chain.classes[1] in ("quasi", "smooth")
    assert chain.jump1[1] < 1e-6
    assert chain.classes[2] == "smooth"


def test_sampled_jumps_see_a_kink():
    from sirwave.grid import Grid, ProfileFunction

    g = Grid.symmetric(2.0, 4001)
    fn = ProfileFunction(g, np.abs(g.t - 0.1234))
    j1, _ = P.sampled_jumps(fn, 0.1234)
    assert j1 == pytest.approx(2.0, abs=1e-9)


# ------------------------------------------------------------ ordered bracket

def test_plateau_balances_infected_equation(demo):
    p, _ = demo
    phi, psi, chi = plateau_state(p)
    assert p.beta * (p.B / p.mu1) * psi - (p.mu2 + p.gamma) * psi - p.beta * psi * psi == \
        pytest.approx(0.0, abs=1e-15)
    assert lower_plateau_cap(p, (phi, psi, chi)) > 0


def test_growth_rate_is_root_of_symbol(demo):
    p, wp = demo
    rate, second = growth_rates(p, wp)
    sym = growth_symbol(p, wp)
    assert abs(sym(rate)) < 1e-12
    assert 0 < rate < second


def test_bracket_certified(demo_bracket):
    br = demo_bracket
    assert br.ok
    assert br.upper_slack <= 1e-9 and br.lower_slack >= -1e-9
    for u, l in zip(br.upper, br.lower):
        assert np.all(l.values <= u.values)


def test_bracket_lower_peak_below_cap(demo, demo_bracket):
    p, _ = demo
    cap = lower_plateau_cap(p, plateau_state(p))
    assert demo_bracket.peak <= 0.9 * cap
    assert demo_bracket.peak_at == pytest.approx(
        math.log(demo_bracket.rate / (demo_bracket.correction
                                      * (demo_bracket.rate + demo_bracket.delta)))
        / demo_bracket.delta)
