"""Command-line entry point: ``pevo <command> --config run.json [--out dir] [--override key=value]``.

Exit codes: 0 success, 1 scientific failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import reports
from .calculus import InversionError, Transform, invert_eLambda
from .config import ConfigError
from .norms import GevreyNormSpec
from .pipeline import (EvolutionError, GridTooSmall, PipelineError, conjugation_check, energy_report, evolve,
                       select_constants, sigma_sweep)
from .problems import AssumptionViolation, necessary_condition_scan
from .runconfig import RunConfig
from .symbols import LambdaField, SampleLattice, verify_lambda_estimates

log = logging.getLogger("pevo")

OK, SCIENTIFIC, USAGE = 0, 1, 2
TRAJECTORY_COLUMNS = ["t", "l2_v", "l2_u", "gs_u@rho_tilde", "rhs_bound"]
SWEEP_COLUMNS = ["sigma", "growth", "l2_growth", "status", "witness_time"]


class Context:
    def __init__(self, rc: RunConfig, out: str):
        self.rc, self.out = rc, out
        self.prob = rc.problem
        self.grid = rc.grid
        self._sel = None

    def path(self, name):
        return os.path.join(self.out, name)

    @property
    def sel(self):
        if self._sel is None:
            self._sel = select_constants(self.prob, self.grid, fixed_M=self.rc.pinned_M or None)
        return self._sel

    def cfg_with_constants(self):
        """The config's own constants when it pins every M, otherwise the selected ones."""
        cfg = self.rc.cfg
        if cfg.M:
            return cfg
        return self.sel.cfg

    def audit(self):
        return self._sel.to_dict() if self._sel is not None else None

    def write(self, name, command, body):
        return reports.write_json(self.path(name), reports.envelope(command, self.rc, body, self.audit()))


# ---------------------------------------------------------------------------

def cmd_check_symbols(ctx: Context) -> int:
    cfg = ctx.cfg_with_constants()
    lattice = SampleLattice.for_grid(ctx.grid)
    rows = [verify_lambda_estimates(k, cfg, lattice, ctx.prob.sign_ap) for k in range(1, cfg.p)]
    ok = all(r.passed for r in rows)
    ctx.write("symbols_report.json", "check-symbols", {"passed": ok, "levels": [r.to_dict() for r in rows]})
    print(f"lambda estimates: {'pass' if ok else 'FAIL'} ({len(rows)} levels)")
    return OK if ok else SCIENTIFIC


def cmd_invert(ctx: Context) -> int:
    explicit_h = "h" in ctx.rc.doc["gevrey"]
    cfg = ctx.cfg_with_constants()
    if explicit_h and cfg.h != ctx.rc.cfg.h:
        cfg = cfg.with_(h=ctx.rc.cfg.h)
    grid = ctx.grid
    if ctx.rc.run["lam"] and cfg.M and any(cfg.M):
        lam = np.array(LambdaField(cfg, ctx.prob.sign_ap).Lambda_jet(grid.x_nodes, grid.xi_nodes, taper=grid).value,
                       dtype=float)
    else:
        lam = np.zeros((grid.N, grid.N))
    try:
        res = invert_eLambda(lam, grid, h=cfg.h)
    except InversionError as exc:
        ctx.write("invert_report.json", "invert", {"h": cfg.h, "ok": False, "error": str(exc)})
        print(str(exc), file=sys.stderr)
        return SCIENTIFIC
    print(f"h = {res.h:g}  J = {res.neumann_terms_used}  residual = {res.residual:.3e}")
    ctx.write("invert_report.json", "invert", res.to_dict())
    if not res.ok:
        print("residual above 1e-6; increase h", file=sys.stderr)
    return OK if res.ok else SCIENTIFIC


def cmd_conjugate(ctx: Context) -> int:
    cfg = ctx.cfg_with_constants()
    body = conjugation_check(ctx.prob, cfg, ctx.grid)
    ok = body["stratum1_relative_error"] <= 1e-6 and body["expansion_relative_residual"] < 1e-3
    body["passed"] = ok
    ctx.write("conjugation_report.json", "conjugate", body)
    print(f"stratum 1 error {body['stratum1_relative_error']:.3e}, "
          f"expansion residual {body['expansion_relative_residual']:.3e}")
    return OK if ok else SCIENTIFIC


def cmd_constants(ctx: Context) -> int:
    sel = ctx.sel
    reports.write_json(ctx.path("constants_audit.json"), reports.envelope("constants", ctx.rc, sel.to_dict(), None))
    _print_selection(sel)
    return OK if sel.passed else SCIENTIFIC


def _print_selection(sel):
    print("M = " + ", ".join(f"{m:.6g}" for m in sel.M) + f"  K = {sel.K:.6g}  h = {sel.h:g}")
    for s in sel.scans:
        line = f"level {s.level}: min margin {s.min_margin:.4g}"
        if not s.passed:
            w = s.witness
            line += f"  witness t={w['t']:g} x={w['x']:g} xi={w['xi']:g}"
        print(line)


def _solve(ctx: Context, steps: int | None = None):
    sel = ctx.sel
    run = ctx.rc.run
    tr = Transform(sel.cfg, ctx.grid, ctx.prob.sign_ap, lam=run["lam"])
    traj = evolve(ctx.prob.with_cfg(sel.cfg), ctx.rc.forcing(), ctx.rc.initial_data(), sel, ctx.grid,
                  steps or run["steps"], run["scheme"], transform=tr)
    rep = energy_report(traj, sel.cfg, m=run["m"])
    return sel, tr, traj, rep


def _trajectory_rows(traj, rep, theta):
    gs = traj.gs_norms(GevreyNormSpec(rep.m, rep.rho_tilde, theta, 1.0))
    bound = np.sqrt(np.asarray(rep.rhs) * rep.C) if np.isfinite(rep.C) else np.full(len(gs), np.inf)
    return [[t, a, b, c, d] for t, a, b, c, d in zip(traj.times, traj.l2_v, traj.l2_u, gs, bound)]


def cmd_solve(ctx: Context) -> int:
    sel, tr, traj, rep = _solve(ctx)
    reports.write_csv(ctx.path("trajectory.csv"), TRAJECTORY_COLUMNS, _trajectory_rows(traj, rep, sel.cfg.theta))
    reports.write_json(ctx.path("constants_audit.json"), reports.envelope("solve", ctx.rc, sel.to_dict(), None))
    body = {"energy": rep.to_dict(), "scheme": traj.scheme, "steps": len(traj.times) - 1,
            "q_roundtrip_max": float(np.max(traj.roundtrip)), "scans_passed": sel.passed}
    ctx.write("energy_report.json", "solve", body)
    ok = rep.finite and sel.passed
    print(f"C = {rep.C:.6g}  C' = {rep.gronwall_rate:.6g}  scans {'pass' if sel.passed else 'FAIL'}")
    if not sel.passed:
        _print_selection(sel)
    return OK if ok else SCIENTIFIC


def cmd_energy(ctx: Context) -> int:
    """Energy constants at S and 2S steps; C must agree within 10% (time-discretization convergence)."""
    S = ctx.rc.run["steps"]
    sel, _, traj, rep = _solve(ctx, S)
    _, _, traj2, rep2 = _solve(ctx, 2 * S)
    drift = abs(rep2.C - rep.C) / rep.C if rep.C > 0 else 0.0
    body = {"steps": [S, 2 * S], "C": [rep.C, rep2.C], "gronwall_rate": [rep.gronwall_rate, rep2.gronwall_rate],
            "relative_change_C": drift, "reports": [rep.to_dict(), rep2.to_dict()],
            "scans_passed": sel.passed}
    ok = rep.finite and rep2.finite and drift <= 0.10 and sel.passed
    body["passed"] = ok
    ctx.write("energy_report.json", "energy", body)
    print(f"C = {rep.C:.6g} (S={S}), {rep2.C:.6g} (S={2 * S}); relative change {drift:.2e}")
    return OK if ok else SCIENTIFIC


def cmd_cn2(ctx: Context) -> int:
    fit = necessary_condition_scan(ctx.prob)
    ctx.write("cn2_fit.json", "cn2", fit.to_dict())
    print(f"M = {fit.M:.6g}  N = {fit.N:.6g}  relative residual {fit.relative_residual:.3g}  "
          f"super-logarithmic: {fit.super_logarithmic}")
    return OK


def cmd_sweep(ctx: Context) -> int:
    run = ctx.rc.run
    rows = sigma_sweep(ctx.prob.name, run["sigmas"], ctx.rc.cfg, ctx.grid, S=run["steps"], horizon=run["horizon"],
                       imag_scale=float(ctx.rc.doc["problem"].get("imag_scale", 1.0)), sel=ctx.sel,
                       workers=run["workers"])
    reports.write_csv(ctx.path("sweep.csv"), SWEEP_COLUMNS,
                      [[r["sigma"], r["growth"], r.get("l2_growth"), r["status"], r.get("witness_time")] for r in rows])
    ctx.write("sweep_report.json", "sweep", {"rows": rows})
    for r in rows:
        g = "blowup" if r["growth"] is None else f"{r['growth']:.6g}"
        print(f"sigma = {r['sigma']:g}: growth {g}")
    return OK


COMMANDS = {
    "check-symbols": cmd_check_symbols,
    "invert": cmd_invert,
    "conjugate": cmd_conjugate,
    "constants": cmd_constants,
    "solve": cmd_solve,
    "energy": cmd_energy,
    "cn2": cmd_cn2,
    "sweep": cmd_sweep,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pevo", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="run configuration (JSON)")
    ap.add_argument("--out", default=None, help="output directory (defaults to outputs.dir of the config)")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="dotted key with a JSON value, e.g. gevrey.M=[0,null]; repeatable")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        rc = RunConfig.load(args.config, args.override)
        ctx = Context(rc, args.out or rc.out_dir)
        return COMMANDS[args.command](ctx)
    except (ConfigError, AssumptionViolation, GridTooSmall) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE
    except (EvolutionError, PipelineError, InversionError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return SCIENTIFIC


def run(argv=None):
    sys.exit(main(argv))


if __name__ == "__main__":
    run()
