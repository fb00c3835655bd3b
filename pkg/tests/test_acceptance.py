"""End-to-end acceptance checks on the reference configuration.

Each check records one ``criterion N: PASS|FAIL`` line; the lines are printed
in the terminal summary and by ``python tests/test_acceptance.py``.
"""
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from sirwave import profiles as P
from sirwave.bracket import build_bracket
from sirwave.charroots import compute_roots
from sirwave.cli import main
from sirwave.greens import green_closed_form_r0, green_numeric, kernel_for, linear_defect, \
    solve_linear_fde
from sirwave.grid import Grid, ProfileFunction
from sirwave.iteration import asymptotics_check, build_kernels, cross_iterate, wave_residual
from sirwave.model import infected_branch, pqm_constants, reproduction_number, wave_frame
from sirwave.pdesim import compare_with_wave, front_position, front_speed, initial_state, \
    simulate, wave_initial_fields

sys.path.insert(0, str(Path(__file__).resolve().parent))
from conftest import CONFIGS, load_config  # noqa: E402

REFERENCE = str(CONFIGS / "reference.cfg")
WAVE_GRID = Grid(-160.0, 320.0 / 4095, 4096)
LINES = []


def record(n, ok, detail, elapsed, limit=None):
    timing = f"{elapsed:.2f} s" + (f" (limit {limit:g} s)" if limit else "")
    if limit is not None and elapsed >= limit:
        ok, detail = False, f"{detail}; too slow"
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  [{timing}]"
    LINES.append(line)
    print(line)
    return ok


def attempt(fn):
    """Run one check; a raised error is a failure with its message as detail."""
    start = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # reported, never swallowed silently
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return ok, detail, time.perf_counter() - start


def reference_frame():
    p, M = load_config("reference.cfg")
    return p, M, wave_frame(p, M, pqm_constants(p, M))


_WAVE = {}


def reference_wave():
    """Converged reference wave; computed once and shared by criteria 5 and 7."""
    if "value" not in _WAVE:
        p, M, wp = reference_frame()
        kernels = build_kernels(p, wp, WAVE_GRID)
        br = build_bracket(p, wp, WAVE_GRID, kernels)
        _WAVE["value"] = (p, wp) + cross_iterate(br.upper, br.lower, kernels, p, wp, tol=1e-10)
    return _WAVE["value"]


# ------------------------------------------------------------ checks

def check_roots():
    p, M = load_config("reference.cfg")
    wp = wave_frame(p, M)
    recs = compute_roots(p, M, wp.r)
    worst = max(r.residual for r in recs)
    at_zero = max(abs(r.eta - r.lam) for r in compute_roots(p, M, (0.0, 0.0, 0.0)))
    gaps = np.array([[abs(x.eta - x.lam) for x in compute_roots(p, M, (r, r, r))]
                     for r in (0.04, 0.02, 0.01)])
    ratios = gaps[:-1] / gaps[1:]
    ok = len(recs) == 6 and worst < 1e-12 and at_zero <= 1e-15 and \
        np.all(np.abs(ratios - 2.0) <= 0.4)
    return ok, (f"max |residual| {worst:.1e}, |eta(0)-lam| {at_zero:.1e}, "
                f"halving ratios in [{ratios.min():.3f}, {ratios.max():.3f}]")


def check_kernels():
    grid = Grid.symmetric(30.0, 6001)
    k0 = green_numeric(2.0, 3.0, 0.0, grid)
    inner = np.abs(k0.xi) <= 10.0
    err = np.max(np.abs(k0.values[inner] - green_closed_form_r0(2.0, 3.0, k0.xi[inner])))
    mass_err, covered = 0.0, True
    for r in (0.0, 0.01, 0.05):
        k = green_numeric(2.0, 3.0, r, grid)
        mass_err = max(mass_err, abs(k.mass() + 1.0 / 3.0))
        covered &= bool(np.all(np.abs(k.values) <= k.K * np.exp(-k.alpha * np.abs(k.xi))))
    ok = err < 1e-6 and mass_err < 1e-6 and covered
    return ok, f"closed-form error {err:.1e}, mass error {mass_err:.1e}, envelope covers {covered}"


def check_linear_solve():
    grid = Grid.symmetric(15.0, 3001)
    t = grid.t
    kernel = kernel_for(2.0, 3.0, 0.02, grid)
    cases = {
        "constant": ProfileFunction(grid, np.full(grid.n, 2.0), 2.0, 2.0),
        "bump": ProfileFunction(grid, np.where(np.abs(t) < 2, np.cos(np.pi * t / 4) ** 4, 0.0)),
        "step": ProfileFunction(grid, 0.5 * (1 + np.tanh(t)), 0.0, 1.0),
    }
    worst = 0.0
    for f in cases.values():
        x = solve_linear_fde(2.0, 3.0, 0.02, f, kernel=kernel)
        defect = linear_defect(2.0, 3.0, 0.02, x, f, interior=slice(200, grid.n - 200))
        worst = max(worst, defect / (1.0 + np.max(np.abs(f.values))))
    return worst < 1e-4, f"worst relative defect {worst:.1e}"


def check_certification():
    p, M = load_config("reference.cfg")
    wp = wave_frame(p, M)
    params = P.find_parameters(p, wp)
    cases = P.check_super_cases(p, wp, params) + P.check_sub_cases(p, wp, params)
    bad = [f"{c.side}{c.equation}.{c.case}" for c in cases if not c.ok]
    ok = params.certificate.ok and len(cases) == 18 and not bad
    return ok, f"certificate {params.certificate.ok}, {18 - len(bad)}/18 regions"


def check_iteration():
    p, wp, wave, rep = reference_wave()
    gaps = np.diff(rep.gaps[:10])
    res = max(wave_residual(wave, p, wp))
    asym = asymptotics_check(wave, wp.k)
    ok = bool(np.all(gaps < 0)) and min(rep.monotone_worst) >= -1e-9 and \
        min(rep.sandwich_worst) >= -1e-9 and res < 1e-4 and asym.ok
    return ok, f"{rep.iterations} steps, residual {res:.1e}, limits ok {asym.ok}"


def check_smoothing():
    p, M = load_config("reference.cfg")
    wp = wave_frame(p, M)
    chain = P.smoothing_chain(p, wp, P.find_parameters(p, wp))
    ok = chain.classes[0] == "super" and chain.classes[1] in ("quasi", "smooth") and \
        chain.jump1[1] < 1e-6
    return ok, f"classes {chain.classes}, C1 jump after one step {chain.jump1[1]:.1e}"


def check_pde():
    p, wp, wave, _ = reference_wave()
    length, dx, dt = 240.0, 0.2, 0.01
    x = np.linspace(0.0, length, int(round(length / dx)) + 1)
    level = 0.5 * wp.k2
    xi = front_position(wave.grid.t, wave.psi.values, level)
    st = initial_state(x, wave_initial_fields(wave, x, xi - 0.75 * length), p, dt)
    traj = simulate(st, p, 20.0, snapshot_every=100)
    speed = front_speed(traj, level)
    shape = compare_with_wave(traj, wave, p.c, level).worst_sup
    ok = max(p.taus) <= 0.01 and abs(speed - p.c) < 0.1 * p.c and shape < 0.05 * wp.k2
    return ok, f"speed {speed:.4f} vs c {p.c:.4f}, shape error {shape / wp.k2:.2%} of k2"


def check_threshold():
    with tempfile.TemporaryDirectory() as tmp:
        codes = [main(["run", "--config", REFERENCE, "--set", s, "--out", f"{tmp}/{i}"])
                 for i, s in enumerate(("b=0.5", "b=1", "c=0.5*cstar"))]
    p, _ = load_config("reference.cfg")
    bs = np.linspace(0.5, 1.5, 10)
    r0 = np.array([reproduction_number(replace(p, B=b)) for b in bs])
    infected = np.array([infected_branch(replace(p, B=b)) for b in bs])
    crosses = r0[0] < 1 < r0[-1] and bool(np.all(np.diff(infected) > 0))
    sign_ok = bool(np.all((r0 > 1) == (infected > 0)))
    ok = codes == [2, 2, 2] and crosses and sign_ok
    return ok, f"exit codes {codes}, infected level monotone through zero {crosses and sign_ok}"


def check_determinism():
    def artifacts(root):
        return {p.relative_to(root).as_posix(): p.read_bytes()
                for p in sorted(root.rglob("*")) if p.is_file()}

    with tempfile.TemporaryDirectory() as tmp:
        runs = []
        for name in ("a", "b"):
            base = Path(tmp) / name
            codes = (main(["run", "--config", REFERENCE, "--seed", "7", "--out", str(base / "run")]),
                     main(["roots", "--config", REFERENCE, "--seed", "7",
                           "--out", str(base / "roots")]))
            runs.append((codes, artifacts(base)))
    (c1, a1), (c2, a2) = runs
    ok = c1 == c2 and a1 == a2 and len(a1) > 0
    return ok, f"{len(a1)} artifacts compared, exit codes {c1}"


CRITERIA = [
    (1, check_roots, 1.0),
    (2, check_kernels, 5.0),
    (3, check_linear_solve, 5.0),
    (4, check_certification, 10.0),
    (5, check_iteration, 60.0),
    (6, check_smoothing, 10.0),
    (7, check_pde, 120.0),
    (8, check_threshold, None),
    (9, check_determinism, None),
]


@pytest.mark.parametrize("n, fn, limit", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(n, fn, limit):
    ok, detail, elapsed = attempt(fn)
    assert record(n, ok, detail, elapsed, limit), LINES[-1]


if __name__ == "__main__":
    results = [record(n, *attempt(fn), limit) for n, fn, limit in CRITERIA]
    sys.exit(0 if all(results) else 1)
