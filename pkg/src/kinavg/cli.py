"""Command line interface: ``kinavg {run,sweep,limit,ptf-residual,check}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from kinavg import harness
from kinavg.analysis import fit_rate, trajectory_errors
from kinavg.fields import DensityField, KineticField, random_kinetic_field
from kinavg.kinetic import SolverParams, simulate
from kinavg.ptf import SigmoidChi, TestFunction, balanced_driver_value, residual_scaling

log = logging.getLogger("kinavg")


def _config(args) -> harness.SweepConfig:
    cfg = harness.load_config(args.config) if args.config else harness.SweepConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = _config(args)
    model, sigma = cfg.velocity_model(), cfg.sigma_model()
    rho0 = cfg.initial_density(harness.make_rng(cfg.seed, 10**6, args.replication))
    f0 = KineticField.equilibrium(rho0, model.maxwellian)
    params = SolverParams(args.eps, args.delta, cfg.T, cfg.N, cfg.n_out, cfg.c1, cfg.c2,
                          stopped=cfg.stopped)
    traj = simulate(f0, params, model, sigma, cfg.m_bar, cfg.ell0,
                    harness.make_rng(cfg.seed, args.cell, args.replication), cfg.alpha,
                    assert_bound=False)
    lim = harness._limit_for(cfg, rho0, model, sigma)
    out = _out(args)
    rows = harness.trajectory_rows(traj.times, traj.rho, extra={
        "norm_f": traj.norm_f, "norm_Lf": traj.norm_Lf, "dissipation": traj.dissipation,
        "mass": traj.mass})
    harness.write_csv(rows, out / "trajectory.csv")
    e_fin, e_sup, e_l2 = trajectory_errors(traj.times, traj.rho, lim.coeffs, model.d,
                                           cfg.varsigma[0])
    print(f"tau_hit={traj.tau_hit} bound_ratio_max={traj.bound_ratio_max:.4g} "
          f"err_sup_Hneg={e_sup:.4e} err_L2_time={e_l2:.4e}")
    if args.plots:
        from kinavg import plotting
        plotting.trajectory_figure(traj.times, traj.rho, lim.coeffs, out / "trajectory.png",
                                   model.d)
    return 1 if traj.violated else 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    try:
        result = harness.run_sweep(cfg, threads=args.threads, out_dir=_out(args),
                                   plots=args.plots)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for row in result.summary:
        print(f"eps={row['eps']:<8g} delta={row['delta']:<8g} "
              f"sup_Hneg={row['mean_err_sup_Hneg']:.4e} +- {row['se_err_sup_Hneg']:.1e}  "
              f"L2T={row['mean_err_L2_time']:.4e}  stopped={row['stop_fraction']:.3f}"
              f"{'  FLAGGED' if row['flagged'] else ''}")
    return 1 if result.flagged else 0


def cmd_limit(args) -> int:
    cfg = _config(args)
    traj = harness.limit_run(cfg, method=args.method)
    harness.write_csv(harness.trajectory_rows(traj.times, traj.coeffs), _out(args) / "limit.csv")
    return 0


def cmd_ptf(args) -> int:
    cfg = _config(args)
    model = cfg.velocity_model()
    N, d = min(cfg.N, 32), cfg.dimension
    sigma = harness.SigmaModel.from_coefficients(cfg.sigma0, cfg.sigma1, N, d, cfg.m_bar)
    rng = harness.make_rng(cfg.seed, 0, 0)
    f = random_kinetic_field(rng, model.n_nodes, N, d, decay=1.5)
    if d == 1:
        xi = DensityField.from_function(
            lambda x: np.sin(2 * np.pi * x) + 0.3 * np.cos(2 * np.pi * x), N)
    else:
        xi = DensityField.from_function(
            lambda x, y: np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y), N, d)
    tf = TestFunction(SigmoidChi(2.0), xi.coeffs, d)
    grid = 2.0 ** -np.arange(3, 3 + args.points)
    if args.ell == "auto":
        ell = balanced_driver_value(tf, f, model, sigma, grid[-1], args.eps_fixed,
                                    grid[-1], args.delta_fixed)
    else:
        ell = float(args.ell)
    rows = []
    for r in residual_scaling(tf, f, ell, model, sigma, grid, [args.delta_fixed]):
        rows.append({"sweep": "eps", **r})
    for r in residual_scaling(tf, f, ell, model, sigma, [args.eps_fixed], grid):
        rows.append({"sweep": "delta", **r})
    out = _out(args)
    harness.write_csv(rows, out / "ptf_residual.csv",
                      columns=["sweep", "eps", "delta", "residual", "bound_value"])
    for key in ("eps", "delta"):
        sel = [r for r in rows if r["sweep"] == key]
        fit = fit_rate([r[key] for r in sel], [r["residual"] for r in sel])
        print(f"slope in {key}: {fit.slope:.3f} (R^2 {fit.r2:.4f}) at ell={ell:.6g}")
    if args.plots:
        from kinavg import plotting
        plotting.residual_figure(rows, out / "ptf_residual.png")
    return 0


def cmd_check(args) -> int:
    cfg = _config(args)
    results = harness.check_suite(cfg, seed=cfg.seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int, help="override the base seed")
    common.add_argument("--threads", type=int, default=1, help="worker processes")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--plots", action="store_true", help="also write PNG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="kinavg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="simulate a single path")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--cell", type=int, default=0)
    p.add_argument("--replication", type=int, default=0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="Monte Carlo sweep over (eps, delta)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("limit", parents=[common], help="solve the limit equation only")
    p.add_argument("--method", choices=("auto", "exact", "split"), default="auto")
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("ptf-residual", parents=[common],
                       help="residual of the perturbed generator on dyadic grids")
    p.add_argument("--eps-fixed", type=float, default=1e-3)
    p.add_argument("--delta-fixed", type=float, default=1e-3)
    p.add_argument("--points", type=int, default=6)
    p.add_argument("--ell", default="auto", help="driver value, or 'auto'")
    p.set_defaults(func=cmd_ptf)

    p = sub.add_parser("check", parents=[common], help="run the property checks")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
