"""Command-line entry point.

Subcommands read a flat ``key = value`` parameter file and write CSV/JSON
artifacts into ``--out``. Exit status: 0 success, 2 infeasible configuration
(reproduction number at or below one, or speed below the critical speed),
3 numerical failure. Failures also write ``failure.json``.

CSV columns:
  roots.csv       label, lam, eta, r, residual
  greens.csv      xi, G[, G_closed]
  super.csv       t, phi, psi, chi        (also sub.csv, bracket_upper.csv, bracket_lower.csv)
  wave.csv        t, phi, psi, chi
  iterates.csv    n, t, phi_up, psi_up, chi_up, phi_lo, psi_lo, chi_lo
  snapshots.csv   t, x, N, I, R
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import errors
from .bracket import build_bracket
from .charroots import compute_roots
from .errors import ConfigError, SirWaveError
from .greens import green_closed_form_r0, green_numeric
from .grid import Grid, ProfileTriple
from .iteration import asymptotics_check, build_kernels, cross_iterate, wave_residual
from .model import (SirParameters, critical_wave_speed, endemic_equilibrium,
                    parameters_from_mapping, parse_key_values, pqm_constants,
                    reproduction_number, wave_frame)

SCHEMA_VERSION = "1"


class Infeasible(Exception):
    """Configuration rejected by the threshold gates."""


@dataclass
class RunConfig:
    p: SirParameters
    M: tuple
    h: float
    half_width: float
    tol_iter: float
    tol_quad: float
    max_iter: int
    out: Path
    emit_every: int
    seed: int

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigError("h", "grid spacing must be positive")
        if not self.half_width > 0:
            raise ConfigError("half_width", "must be positive")
        for name in ("tol_iter", "tol_quad"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "tolerance must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter", "must be at least 1")

    @property
    def grid(self):
        n = int(round(2 * self.half_width / self.h)) + 1
        return Grid(-self.half_width, 2 * self.half_width / (n - 1), n)


def _fmt(x):
    return repr(float(x))


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, payload):
    body = {"schema_version": SCHEMA_VERSION, **_clean(payload)}
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def triple_rows(triple: ProfileTriple):
    return zip(triple.grid.t, triple.phi.values, triple.psi.values, triple.chi.values)


def gate(p: SirParameters, M):
    r0 = reproduction_number(p)
    if r0 <= 1:
        raise Infeasible("reproduction number below threshold")
    cstar = critical_wave_speed(M, p)
    if p.c < cstar:
        raise Infeasible("wave speed below critical")
    return r0, cstar


# ---------------------------------------------------------------- stages

def stage_roots(cfg: RunConfig, wp):
    recs = compute_roots(cfg.p, cfg.M, wp.r)
    write_csv(cfg.out / "roots.csv", ["label", "lam", "eta", "r", "residual"],
              [(r.label, r.lam, r.eta, r.r, abs(r.residual)) for r in recs])
    return recs


def stage_greens(cfg: RunConfig, a, b, r, half_width=20.0):
    n = int(round(2 * half_width / cfg.h)) | 1
    grid = Grid.symmetric(half_width, n)
    k = green_numeric(a, b, r, grid, tol=cfg.tol_quad)
    header = ["xi", "G"]
    cols = [k.xi, k.values]
    if r == 0:
        header.append("G_closed")
        cols.append(green_closed_form_r0(a, b, k.xi))
    write_csv(cfg.out / "greens.csv", header, zip(*cols))
    summary = {"a": a, "b": b, "r": r, "K": k.K, "alpha": k.alpha, "mass": k.mass(),
               "mass_defect": k.mass_defect(), "tail_estimate": k.tail_estimate}
    if r == 0:
        summary["closed_form_error"] = float(np.max(np.abs(cols[1] - cols[2])))
    write_json(cfg.out / "greens.json", summary)
    return k, summary


def stage_profiles(cfg: RunConfig, wp, kernels):
    """Certificate for the piecewise-exponential pair and for the ordered bracket."""
    from . import profiles as P

    grid = cfg.grid
    out = {}
    try:
        params = P.find_parameters(cfg.p, wp)
        sup = P.sample_triple(P.build_super(params), grid)
        sub = P.sample_triple(P.build_sub(params), grid)
        write_csv(cfg.out / "super.csv", ["t", "phi", "psi", "chi"], triple_rows(sup))
        write_csv(cfg.out / "sub.csv", ["t", "phi", "psi", "chi"], triple_rows(sub))
        cases = P.check_super_cases(cfg.p, wp, params) + P.check_sub_cases(cfg.p, wp, params)
        out["piecewise"] = {"ok": all(c.ok for c in cases), "parameters": params.as_json(),
                            "cases": [asdict(c) for c in cases]}
    except SirWaveError as exc:
        out["piecewise"] = {"ok": False, "error": type(exc).__name__, "reason": str(exc)}
    br = build_bracket(cfg.p, wp, grid, kernels)
    write_csv(cfg.out / "bracket_upper.csv", ["t", "phi", "psi", "chi"], triple_rows(br.upper))
    write_csv(cfg.out / "bracket_lower.csv", ["t", "phi", "psi", "chi"], triple_rows(br.lower))
    out["bracket"] = {"ok": br.ok, **br.as_json()}
    write_json(cfg.out / "profiles.json", out)
    return br, out


def stage_iterate(cfg: RunConfig, wp, kernels, br):
    rows = []

    def emit(n, up, lo):
        if cfg.emit_every and n % cfg.emit_every == 0:
            for j, t in enumerate(up.grid.t):
                rows.append((str(n), t, up.phi.values[j], up.psi.values[j], up.chi.values[j],
                             lo.phi.values[j], lo.psi.values[j], lo.chi.values[j]))

    wave, rep = cross_iterate(br.upper, br.lower, kernels, cfg.p, wp, tol=cfg.tol_iter,
                              max_iter=cfg.max_iter, emit=emit)
    write_csv(cfg.out / "wave.csv", ["t", "phi", "psi", "chi"], triple_rows(wave))
    if cfg.emit_every:
        write_csv(cfg.out / "iterates.csv",
                  ["n", "t", "phi_up", "psi_up", "chi_up", "phi_lo", "psi_lo", "chi_lo"], rows)
    asym = asymptotics_check(wave, wp.k)
    res = wave_residual(wave, cfg.p, wp)
    summary = {"report": rep.as_json(), "residual": list(res), "mu": kernels.mu,
               "asymptotics": {"ok": asym.ok, "left_gap": asym.left_gap,
                               "right_gap": asym.right_gap}}
    write_json(cfg.out / "iteration.json", summary)
    return wave, rep, summary


def run_pipeline(cfg: RunConfig):
    """Full chain; returns the exit status and writes ``summary.json`` or ``failure.json``."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    stage = "gate"
    try:
        r0, cstar = gate(cfg.p, cfg.M)
        stage = "pqm"
        betas = pqm_constants(cfg.p, cfg.M, seed=cfg.seed)
        wp = wave_frame(cfg.p, cfg.M, betas)
        stage = "roots"
        stage_roots(cfg, wp)
        stage = "kernels"
        grid = cfg.grid
        kernels = build_kernels(cfg.p, wp, grid, tol=cfg.tol_quad)
        if cfg.half_width < 20.0 / kernels.mu:
            raise ConfigError("half_width",
                              f"{cfg.half_width} < 20/mu = {20.0 / kernels.mu:.1f}")
        stage = "profiles"
        br, prof = stage_profiles(cfg, wp, kernels)
        stage = "iterate"
        wave, rep, it = stage_iterate(cfg, wp, kernels, br)
        write_json(cfg.out / "residual.json", {"residual": it["residual"]})
    except Infeasible as exc:
        write_json(cfg.out / "failure.json", {"stage": stage, "exit": 2, "reason": str(exc)})
        return 2, str(exc)
    except (SirWaveError, FloatingPointError, ValueError) as exc:
        write_json(cfg.out / "failure.json", {"stage": stage, "exit": 3,
                                               "error": type(exc).__name__, "reason": str(exc)})
        return 3, f"{stage}: {exc}"
    write_json(cfg.out / "summary.json", {
        "r0": r0, "cstar": cstar, "c": cfg.p.c, "k": list(wp.k), "betas": list(wp.betas),
        "iterations": rep.iterations, "stop_reason": rep.stop_reason,
        "residual": it["residual"], "piecewise_ok": prof["piecewise"]["ok"],
        "bracket_ok": prof["bracket"]["ok"]})
    return 0, "ok"


# ---------------------------------------------------------------- simulate

def stage_simulate(cfg: RunConfig, dx, dt, t_final, snapshot_every, length, wave=None):
    from .pdesim import (compare_with_wave, front_speed, initial_state, simulate,
                         wave_initial_fields)

    p = cfg.p
    k = wave_frame(p, cfg.M).k if wave is not None else None
    n = int(round(length / dx)) + 1
    x = np.linspace(0.0, length, n)
    _, i_star, _ = endemic_equilibrium(p)
    level = 0.5 * i_star
    if wave is None:
        fields = np.zeros((3, n))
        bump = np.abs(x - 0.8 * length) < 2.0
        fields[1, bump] = 0.5 * i_star
    else:
        from .pdesim import front_position
        xi_l = front_position(wave.grid.t, wave.psi.values, level)
        fields = wave_initial_fields(wave, x, xi_l - 0.75 * length)
    state = initial_state(x, fields, p, dt)
    summary = {"dx": dx, "dt": dt, "t_final": t_final, "c": p.c, "blow_up": False}
    try:
        traj = simulate(state, p, t_final, snapshot_every)
    except errors.BlowUp as exc:
        summary.update(blow_up=True, reason=str(exc), clip_count=state.clip_events)
        write_json(cfg.out / "simulate.json", summary)
        raise
    rows = []
    for t, snap in zip(traj.times, traj.snapshots):
        for j in range(n):
            rows.append((t, x[j], snap[0, j], snap[1, j], snap[2, j]))
    write_csv(cfg.out / "snapshots.csv", ["t", "x", "N", "I", "R"], rows)
    summary["clip_count"] = state.clip_events
    try:
        summary["speed"] = front_speed(traj, level)
    except errors.NoFront as exc:
        summary["speed"] = None
        summary["front_error"] = str(exc)
    if wave is not None:
        cmp = compare_with_wave(traj, wave, p.c, level)
        summary["shape_sup_over_k2"] = cmp.worst_sup / k[1]
        summary["comparison"] = cmp.as_json()
    write_json(cfg.out / "simulate.json", summary)
    return summary


# ---------------------------------------------------------------- validate

def validate(cfg: RunConfig):
    """Invariant suite; returns a list of ``(name, ok, detail)``."""
    from . import profiles as P

    rows = []

    def check(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # every failure is a table row, never a crash
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        rows.append((name, bool(ok), detail))
        return ok

    p, M = cfg.p, cfg.M
    check("threshold", lambda: (reproduction_number(p) > 1 and p.c >= critical_wave_speed(M, p),
                                f"R0={reproduction_number(p):.4g} c={p.c:.4g} "
                                f"c*={critical_wave_speed(M, p):.4g}"))
    state = {}

    def pqm():
        state["wp"] = wave_frame(p, M, pqm_constants(p, M, seed=cfg.seed))
        return True, "betas=" + ",".join(f"{b:.4g}" for b in state["wp"].betas)
    check("pqm", pqm)
    wp = state.get("wp") or wave_frame(p, M)

    def roots():
        recs = compute_roots(p, M, wp.r)
        worst = max(abs(r.residual) for r in recs)
        return worst < 1e-12, f"max residual {worst:.2e}"
    check("roots", roots)

    def greens():
        a, b = p.c / p.D_I, wp.beta2 / p.D_I
        k = green_numeric(a, b, wp.r2, Grid.symmetric(20.0, 2001), tol=cfg.tol_quad)
        env = k.K * np.exp(-k.alpha * np.abs(k.xi))
        ok = k.mass_defect() < 1e-6 and np.all(np.abs(k.values) <= env)
        return ok, f"mass defect {k.mass_defect():.2e}"
    check("greens", greens)

    def piecewise():
        params = P.find_parameters(p, wp)
        cases = P.check_super_cases(p, wp, params) + P.check_sub_cases(p, wp, params)
        bad = [f"{c.side}{c.equation}.{c.case}" for c in cases if not c.ok]
        return params.certificate.ok and not bad, "failed: " + ",".join(bad) if bad else "18/18"
    check("super_sub_cases", piecewise)

    def pipeline():
        kernels = build_kernels(p, wp, cfg.grid, tol=cfg.tol_quad)
        br = build_bracket(p, wp, cfg.grid, kernels)
        wave, rep = cross_iterate(br.upper, br.lower, kernels, p, wp, tol=cfg.tol_iter,
                                  max_iter=cfg.max_iter)
        res = wave_residual(wave, p, wp)
        asym = asymptotics_check(wave, wp.k)
        ok = max(res) < 1e-4 and asym.ok and min(rep.monotone_worst) >= -1e-9
        return ok, f"{rep.iterations} steps, residual {max(res):.2e}"
    check("iteration", pipeline)
    return rows


# ---------------------------------------------------------------- argument parsing

def _load_config(args) -> RunConfig:
    text = Path(args.config).read_text() if args.config else ""
    values = parse_key_values(text)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(item, "expected key=value")
        key, val = item.split("=", 1)
        values[key.strip().lower()] = val.strip()
    p, M = parameters_from_mapping(values)
    return RunConfig(p=p, M=tuple(M), h=args.h, half_width=args.half_width, tol_iter=args.tol,
                     tol_quad=args.tol_quad, max_iter=args.max_iter, out=Path(args.out),
                     emit_every=getattr(args, "emit_every", 0) or 0, seed=args.seed)


def build_parser():
    ap = argparse.ArgumentParser(prog="sirwave", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value parameter file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one parameter (repeatable)")
    common.add_argument("--out", default="sirwave_out", help="artifact directory")
    common.add_argument("--h", type=float, default=320.0 / 4095, help="profile grid spacing")
    common.add_argument("--half-width", type=float, default=160.0,
                        help="profile grid covers [-W, W]")
    common.add_argument("--tol", type=float, default=1e-10, help="iteration tolerance")
    common.add_argument("--tol-quad", type=float, default=1e-8, help="kernel tail tolerance")
    common.add_argument("--max-iter", type=int, default=2000)
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("roots", parents=[common], help="continued characteristic roots")
    g = sub.add_parser("greens", parents=[common], help="sample one Green's kernel")
    g.add_argument("--r", type=float, default=None, help="shift (default: infected r2)")
    g.add_argument("--a", type=float, default=None)
    g.add_argument("--b", type=float, default=None)
    g.add_argument("--kernel-half-width", type=float, default=20.0)
    sub.add_parser("profiles", parents=[common], help="build and certify bounding profiles")
    it = sub.add_parser("iterate", parents=[common], help="crossed monotone iteration")
    it.add_argument("--emit-every", type=int, default=0,
                    help="write every Nth iterate pair to iterates.csv")
    s = sub.add_parser("simulate", parents=[common], help="direct PDE simulation")
    s.add_argument("--dx", type=float, default=0.2)
    s.add_argument("--dt", type=float, default=0.01)
    s.add_argument("--t-final", type=float, default=20.0)
    s.add_argument("--snapshot-every", type=int, default=100)
    s.add_argument("--length", type=float, default=240.0)
    s.add_argument("--from-wave", action="store_true",
                   help="start from the converged wave instead of a bump")
    sub.add_parser("validate", parents=[common], help="invariant suite as a table")
    sub.add_parser("run", parents=[common], help="full pipeline")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    cfg.out.mkdir(parents=True, exist_ok=True)
    if args.command == "run":
        code, msg = run_pipeline(cfg)
        print(msg if code == 0 else f"exit {code}: {msg}")
        return code
    if args.command == "validate":
        rows = validate(cfg)
        width = max(len(r[0]) for r in rows)
        for name, ok, detail in rows:
            print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
        write_json(cfg.out / "validate.json",
                   {"suites": [{"name": n, "ok": o, "detail": d} for n, o, d in rows]})
        return 0 if all(r[1] for r in rows) else 3
    try:
        if args.command in ("profiles", "iterate", "simulate"):
            gate(cfg.p, cfg.M)
        wp = wave_frame(cfg.p, cfg.M)
        if args.command == "roots":
            for r in stage_roots(cfg, wp):
                print(f"{r.label}  eta={r.eta:.12g}  residual={abs(r.residual):.2e}")
        elif args.command == "greens":
            a = args.a if args.a is not None else cfg.p.c / cfg.p.D_I
            b = args.b if args.b is not None else wp.beta2 / cfg.p.D_I
            r = args.r if args.r is not None else wp.r2
            _, summary = stage_greens(cfg, a, b, r, args.kernel_half_width)
            print(json.dumps(_clean(summary), sort_keys=True))
        elif args.command == "profiles":
            kernels = build_kernels(cfg.p, wp, cfg.grid, tol=cfg.tol_quad)
            _, out = stage_profiles(cfg, wp, kernels)
            print(f"piecewise ok={out['piecewise']['ok']} bracket ok={out['bracket']['ok']}")
        elif args.command == "iterate":
            kernels = build_kernels(cfg.p, wp, cfg.grid, tol=cfg.tol_quad)
            br = build_bracket(cfg.p, wp, cfg.grid, kernels)
            _, rep, summary = stage_iterate(cfg, wp, kernels, br)
            print(f"{rep.iterations} steps ({rep.stop_reason}), residual "
                  + ", ".join(f"{x:.2e}" for x in summary["residual"]))
        elif args.command == "simulate":
            wave = None
            if args.from_wave:
                kernels = build_kernels(cfg.p, wp, cfg.grid, tol=cfg.tol_quad)
                br = build_bracket(cfg.p, wp, cfg.grid, kernels)
                wave, _ = cross_iterate(br.upper, br.lower, kernels, cfg.p, wp,
                                        tol=cfg.tol_iter, max_iter=cfg.max_iter)
            summary = stage_simulate(cfg, args.dx, args.dt, args.t_final, args.snapshot_every,
                                     args.length, wave)
            print(json.dumps(_clean({k: v for k, v in summary.items() if k != "comparison"}),
                             sort_keys=True))
    except Infeasible as exc:
        write_json(cfg.out / "failure.json", {"stage": args.command, "exit": 2,
                                               "reason": str(exc)})
        print(f"exit 2: {exc}", file=sys.stderr)
        return 2
    except (SirWaveError, ValueError) as exc:
        write_json(cfg.out / "failure.json", {"stage": args.command, "exit": 3,
                                               "error": type(exc).__name__, "reason": str(exc)})
        print(f"exit 3: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
