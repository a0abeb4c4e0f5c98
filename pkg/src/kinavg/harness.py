"""Configuration, seeded Monte Carlo sweeps over ``(eps, delta)`` and self-checks."""
from __future__ import annotations

import ast
import configparser
import csv
import hashlib
import json
import logging
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from kinavg import __version__, spectral
from kinavg.analysis import ErrorRecord, h_neg_norm, trajectory_errors, weighted_norm
from kinavg.driving import (OUProcess, SigmaModel, delta_bound, ou_coefficients, sample_path)
from kinavg.fields import DensityField, KineticField, random_density, random_kinetic_field
from kinavg.kinetic import SolverParams, epsilon_bound, simulate
from kinavg.limit import solve_limit
from kinavg.ptf import SigmoidChi, TestFunction, poisson_check
from kinavg.velocity import (VelocityModel, averaged_coefficients, bgk_apply, density,
                             make_continuous_model, make_discrete_model)

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


SECTIONS = {
    "velocity": ("kind", "dimension", "nodes", "b_const"),
    "driving": ("m_bar", "ell0", "alpha"),
    "sigma": ("sigma0", "sigma1"),
    "solver": ("N", "T", "n_out", "c1", "c2", "stopped"),
    "sweep": ("eps_list", "delta_list", "coupling", "ratio_power", "replications", "seed",
              "varsigma", "initial", "initial_amplitude"),
}


@dataclass(frozen=True)
class SweepConfig:
    """All run settings. Sigma profiles are sparse Fourier lists ``[k..., re, im]``."""

    kind: str = "discrete"
    dimension: int = 1
    nodes: int = 32
    b_const: tuple = (0.0,)
    m_bar: float = 0.0
    ell0: float = 1.0
    alpha: float = 0.5
    sigma0: tuple = ((0, 0.5, 0.0),)
    sigma1: tuple = ((1, 0.5, 0.0),)
    N: int = 64
    T: float = 0.25
    n_out: int = 50
    c1: float = 0.1
    c2: float = 0.5
    stopped: bool = True
    eps_list: tuple = (0.2, 0.1, 0.05)
    delta_list: tuple = (0.2, 0.1, 0.05)
    coupling: str = "diagonal"
    ratio_power: float = 1.0
    replications: int = 20
    seed: int = 20240601
    varsigma: tuple = (1.0,)
    initial: str = "cosine"
    initial_amplitude: float = 0.5

    # -- derived objects -------------------------------------------------
    def velocity_model(self) -> VelocityModel:
        b = np.asarray(self.b_const, dtype=float)
        if self.kind == "discrete":
            return make_discrete_model(self.dimension, b)
        if self.kind == "continuous":
            return make_continuous_model(self.dimension, self.nodes, b)
        raise ConfigError(f"unknown velocity kind {self.kind!r}")

    def sigma_model(self) -> SigmaModel:
        return SigmaModel.from_coefficients(self.sigma0, self.sigma1, self.N, self.dimension,
                                            self.m_bar)

    def cells(self) -> list[tuple[float, float]]:
        if self.coupling == "grid":
            return [(e, d) for e in self.eps_list for d in self.delta_list]
        if self.coupling == "diagonal":
            return [(e, e) for e in self.eps_list]
        if self.coupling == "ratio":
            return [(e, e**self.ratio_power) for e in self.eps_list]
        raise ConfigError(f"unknown coupling {self.coupling!r}")

    def initial_density(self, rng: np.random.Generator | None = None) -> DensityField:
        d, N, A = self.dimension, self.N, self.initial_amplitude
        if self.initial == "cosine":
            if d == 1:
                return DensityField.from_function(lambda x: 1 + A * np.cos(2 * np.pi * x), N, d)
            return DensityField.from_function(
                lambda x, y: 1 + A * np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y), N, d)
        if self.initial == "random":
            if rng is None:
                raise ConfigError("random initial data needs a generator")
            pert = random_density(rng, N, d, decay=1.0)
            scale = A / max(spectral.sup_norm(pert.coeffs, d), 1e-300)
            return DensityField.constant(1.0, N, d) + pert * scale
        raise ConfigError(f"unknown initial profile {self.initial!r}")

    def validate(self) -> "SweepConfig":
        model = self.velocity_model()
        sigma = self.sigma_model()
        eps0 = epsilon_bound(model, sigma, self.T)
        delta0 = delta_bound(self.ell0)
        for eps, delta in self.cells():
            if not 0 < eps < eps0:
                raise ConfigError(
                    f"cell eps={eps} violates eps < min(1, 1/(4(|a|+|b|)(1+T|sigma_bar|_C1)))"
                    f" = {eps0:.6g}")
            if not 0 < delta < delta0:
                raise ConfigError(
                    f"cell delta={delta} violates delta < min(1, 1/|ell0|) = {delta0:.6g}")
        if self.replications < 1:
            raise ConfigError("need at least one replication")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        return self

    def canonical(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _parse_value(raw: str):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw.strip()


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


def load_config(path) -> SweepConfig:
    """Read an INI file with sections velocity, driving, sigma, solver and sweep."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    known = {f.name for f in fields(SweepConfig)}
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SECTIONS[section] or key not in known:
                raise ConfigError(f"unknown key {section}.{key}")
            values[key] = _tuplify(_parse_value(raw))
    return SweepConfig(**values)


def dump_config(cfg: SweepConfig, path) -> None:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    data = asdict(cfg)
    for section, keys in SECTIONS.items():
        parser[section] = {k: repr(_listify(data[k])) for k in keys}
    with open(path, "w") as fh:
        parser.write(fh)


def _listify(v):
    if isinstance(v, (tuple, list)):
        return [_listify(x) for x in v]
    return v


def make_rng(base_seed: int, cell: int, rep: int) -> np.random.Generator:
    """Counter-based stream for one ``(cell, replication)`` pair."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(cell, rep))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    rows: list
    summary: list
    flagged: list = field(default_factory=list)
    paths: dict = field(default_factory=dict)


def _limit_for(cfg: SweepConfig, rho0: DensityField, model, sigma):
    co = averaged_coefficients(model)
    n_steps = max(cfg.n_out, int(np.ceil(cfg.T / 1e-3)))
    return solve_limit(rho0, co.K, co.J, sigma.sigma_bar, cfg.T, dt=cfg.T / n_steps,
                       n_out=cfg.n_out)


def _path_task(args):
    cfg, cell, eps, delta, rep, limit_coeffs = args
    model = cfg.velocity_model()
    sigma = cfg.sigma_model()
    rng = make_rng(cfg.seed, cell, rep)
    row = {"cell": cell, "eps": eps, "delta": delta, "replication": rep}
    try:
        if cfg.initial == "random":
            rho0 = cfg.initial_density(make_rng(cfg.seed, 10**6, rep))
            limit_coeffs = _limit_for(cfg, rho0, model, sigma).coeffs
        else:
            rho0 = cfg.initial_density()
        f0 = KineticField.equilibrium(rho0, model.maxwellian)
        params = SolverParams(eps, delta, cfg.T, cfg.N, cfg.n_out, cfg.c1, cfg.c2,
                              stopped=cfg.stopped)
        traj = simulate(f0, params, model, sigma, cfg.m_bar, cfg.ell0, rng, cfg.alpha,
                        assert_bound=False)
        s_main = cfg.varsigma[0]
        e_fin, e_sup, e_l2 = trajectory_errors(traj.times, traj.rho, limit_coeffs,
                                               model.d, s_main)
        rec = ErrorRecord(eps, delta, rep, e_fin, e_l2, e_sup, traj.tau_hit is not None,
                          s_main)
        row.update(rec.as_row())
        for s in cfg.varsigma[1:]:
            _, sup_s, _ = trajectory_errors(traj.times, traj.rho, limit_coeffs, model.d, s)
            row[f"err_sup_Hneg_{s:g}"] = sup_s
        row["tau_time"] = traj.tau_hit if traj.tau_hit is not None else ""
        row["bound_ratio_max"] = traj.bound_ratio_max
        row["status"] = "violation" if traj.violated else "ok"
    except Exception as exc:  # recorded and flagged, never dropped
        row["status"] = f"error: {type(exc).__name__}: {exc}"
    return row


def _pairwise_mean(values: np.ndarray) -> tuple[float, float]:
    # np.add.reduce uses pairwise summation on contiguous float arrays
    n = values.size
    mean = float(np.add.reduce(values) / n)
    if n < 2:
        return mean, float("nan")
    var = float(np.add.reduce((values - mean) ** 2) / (n - 1))
    return mean, float(np.sqrt(var / n))


def aggregate(rows: list, cfg: SweepConfig) -> tuple[list, list]:
    summary, flagged = [], []
    for cell, (eps, delta) in enumerate(cfg.cells()):
        cell_rows = sorted((r for r in rows if r["cell"] == cell),
                           key=lambda r: r["replication"])
        ok = [r for r in cell_rows if r["status"] == "ok"]
        bad = len(cell_rows) - len(ok)
        entry = {"cell": cell, "eps": eps, "delta": delta, "replications": len(cell_rows),
                 "failed": bad}
        for key in ("err_Hneg", "err_sup_Hneg", "err_L2_time"):
            vals = np.array([r[key] for r in ok], dtype=float)
            m, se = _pairwise_mean(vals) if vals.size else (float("nan"), float("nan"))
            entry[f"mean_{key}"] = m
            entry[f"se_{key}"] = se
        hits = np.array([bool(r.get("tau_hit")) for r in ok], dtype=float)
        entry["stop_fraction"] = float(hits.mean()) if hits.size else float("nan")
        entry["flagged"] = bad > 0
        if bad:
            flagged.append(cell)
        summary.append(entry)
    return summary, flagged


def run_sweep(cfg: SweepConfig, threads: int = 1, out_dir=None, plots: bool = False
              ) -> SweepResult:
    """Run every ``(cell, replication)`` path and aggregate per cell.

    Results do not depend on ``threads``: each task owns its random stream
    and aggregation runs after all tasks in a fixed order.
    """
    cfg.validate()
    model = cfg.velocity_model()
    sigma = cfg.sigma_model()
    limit_coeffs = None
    limit_traj = None
    if cfg.initial != "random":
        limit_traj = _limit_for(cfg, cfg.initial_density(), model, sigma)
        limit_coeffs = limit_traj.coeffs
    tasks = [(cfg, cell, eps, delta, rep, limit_coeffs)
             for cell, (eps, delta) in enumerate(cfg.cells())
             for rep in range(cfg.replications)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_path_task, tasks, chunksize=max(1, len(tasks) // (8 * threads))))
    else:
        rows = [_path_task(t) for t in tasks]
    rows.sort(key=lambda r: (r["cell"], r["replication"]))
    summary, flagged = aggregate(rows, cfg)
    result = SweepResult(rows=rows, summary=summary, flagged=flagged)
    if out_dir is not None:
        write_outputs(result, cfg, Path(out_dir))
        if plots:
            from kinavg import plotting
            plotting.convergence_figure(result.summary, Path(out_dir) / "convergence.png")
    return result


def write_csv(rows: list, path, columns=None) -> None:
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, restval="", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    return v


def write_outputs(result: SweepResult, cfg: SweepConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_csv(result.rows, out / "paths.csv")
    write_csv(result.summary, out / "summary.csv")
    manifest = {
        "config": cfg.canonical(),
        "config_sha256": cfg.digest(),
        "versions": {"kinavg": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "flagged_cells": result.flagged,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def stopping_fraction(cfg: SweepConfig, delta: float, replications: int, T: float = 1.0,
                      cell: int = 0) -> float:
    """Fraction of driver paths stopped before ``T``; the kinetic solve is not needed."""
    sigma = cfg.sigma_model()
    dt = 0.5 * delta**2
    n = int(np.ceil(T / dt))
    hits = 0
    for rep in range(replications):
        path = sample_path(OUProcess.start(cfg.m_bar, cfg.ell0), delta, T / n, n,
                           make_rng(cfg.seed, cell, rep), sigma=sigma, alpha=cfg.alpha)
        hits += path.tau_hit is not None
    return hits / replications


# ---------------------------------------------------------------------------
# self-checks


@dataclass(frozen=True)
class CheckResult:
    module: str
    prop: str
    passed: bool
    observed: float
    tolerance: float
    inputs: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] {self.module}.{self.prop}: observed {self.observed:.3e} "
                f"(tol {self.tolerance:.1e}) {self.inputs}").rstrip()


def _check(module, prop, observed, tol, inputs=""):
    observed = float(observed)
    return CheckResult(module, prop, bool(np.isfinite(observed) and observed <= tol),
                       observed, tol, inputs)


def check_suite(cfg: SweepConfig | None = None, model: VelocityModel | None = None,
                n_random: int = 10, seed: int = 0) -> list[CheckResult]:
    """Run the structural, corrector, solver and driver property checks.

    ``model`` overrides the configured velocity model, which lets a caller
    inject a faulty one.
    """
    cfg = cfg or SweepConfig()
    results = []
    try:
        cfg.validate()
    except ConfigError as exc:
        return [CheckResult("harness", "config", False, float("nan"), 0.0, str(exc))]
    model = model if model is not None else cfg.velocity_model()
    sigma = cfg.sigma_model()
    rng = np.random.default_rng(seed)
    N, d = min(cfg.N, 32), cfg.dimension
    sig_small = SigmaModel.from_coefficients(cfg.sigma0, cfg.sigma1, N, d, cfg.m_bar)

    results.append(_check("velocity", "normalization", model.normalization_deficit(), 1e-12))
    results.append(_check("velocity", "centering", model.centering_deficit(), 1e-12))
    worst = {"mean_of_Lf": 0.0, "L_of_equilibrium": 0.0, "density_vs_norm": 0.0}
    for _ in range(n_random):
        f = random_kinetic_field(rng, model.n_nodes, N, d)
        rho = density(f, model)
        worst["mean_of_Lf"] = max(worst["mean_of_Lf"],
                                  np.max(np.abs(density(bgk_apply(f, model), model).coeffs)))
        eq = KineticField.equilibrium(rho, model.maxwellian)
        worst["L_of_equilibrium"] = max(worst["L_of_equilibrium"],
                                        np.max(np.abs(bgk_apply(eq, model).coeffs)))
        excess = np.sqrt(np.sum(np.abs(rho.coeffs) ** 2)) - weighted_norm(f, model)
        worst["density_vs_norm"] = max(worst["density_vs_norm"], excess)
    for prop, val in worst.items():
        results.append(_check("velocity", prop, val, 1e-10))

    res_max = dict.fromkeys(("order_-1", "order_0", "L2_phi02", "Lm_phi20", "delta2_over_eps"),
                            0.0)
    for _ in range(n_random):
        f = random_kinetic_field(rng, model.n_nodes, N, d)
        tf = TestFunction(SigmoidChi(2.0), random_density(rng, N, d).coeffs, d)
        ell = float(rng.normal(cfg.m_bar, 2.0))
        for k, v in poisson_check(tf, f, ell, model, sig_small).items():
            res_max[k] = max(res_max[k], v)
    for k, v in res_max.items():
        results.append(_check("ptf", f"poisson_{k}", v, 1e-10))

    eps = 0.5 * min(epsilon_bound(model, sigma, cfg.T), 0.2)
    delta = 0.5 * min(delta_bound(cfg.ell0), 0.2)
    rho0 = cfg.initial_density()
    f0 = KineticField.equilibrium(rho0, model.maxwellian)
    params = SolverParams(eps, delta, min(cfg.T, 0.1), cfg.N, 10, cfg.c1, cfg.c2)
    traj = simulate(f0, params, model, sigma, cfg.m_bar, cfg.ell0, rng, cfg.alpha,
                    assert_bound=False)
    results.append(_check("kinetic", "apriori_bound_ratio", traj.bound_ratio_max, 1.1,
                          f"eps={eps:.3g} delta={delta:.3g}"))
    zero = SigmaModel.constant(0.0, cfg.N, d)
    traj0 = simulate(f0, params, model, zero, cfg.m_bar, cfg.ell0, None)
    results.append(_check("kinetic", "mass_conservation",
                          np.max(np.abs(traj0.mass - traj0.mass[0])), 1e-10))

    co = averaged_coefficients(model)
    s_const = SigmaModel.constant(0.3, N, d)
    rho = random_density(rng, N, d)
    ex = solve_limit(rho, co.K, co.J, s_const.sigma_bar, 0.05, n_out=5, method="exact")
    sp = solve_limit(rho, co.K, co.J, s_const.sigma_bar, 0.05, dt=1e-3, n_out=5,
                     method="split")
    results.append(_check("limit", "exact_vs_split", np.max(np.abs(ex.coeffs - sp.coeffs)),
                          1e-12))

    decay, amp = ou_coefficients(0.7)
    z = rng.standard_normal(50)
    x1, x2, gap = 0.3, -1.7, 0.0
    for i, zi in enumerate(z):
        x1 = cfg.m_bar + (x1 - cfg.m_bar) * decay + amp * zi
        x2 = cfg.m_bar + (x2 - cfg.m_bar) * decay + amp * zi
        gap = max(gap, abs(abs(x1 - x2) - 2.0 * np.exp(-0.7 * (i + 1))))
    results.append(_check("driving", "coupling_decay", gap, 1e-12))
    return results


def limit_run(cfg: SweepConfig, method: str = "auto"):
    model = cfg.velocity_model()
    sigma = cfg.sigma_model()
    co = averaged_coefficients(model)
    rho0 = cfg.initial_density()
    n_steps = max(cfg.n_out, int(np.ceil(cfg.T / 1e-3)))
    return solve_limit(rho0, co.K, co.J, sigma.sigma_bar, cfg.T, dt=cfg.T / n_steps,
                       n_out=cfg.n_out, method=method)


def trajectory_rows(times, rho, n_modes: int = 4, extra: dict | None = None) -> list[dict]:
    """Flatten a 1-d density trajectory into rows of low Fourier modes."""
    rows = []
    for i, t in enumerate(times):
        row = {"t": float(t)}
        c = rho[i]
        if c.ndim == 1:
            for k in range(n_modes + 1):
                row[f"re_{k}"] = float(c[k].real)
                row[f"im_{k}"] = float(c[k].imag)
        else:
            row["re_0"] = float(c[(0,) * c.ndim].real)
        row["l2"] = float(np.sqrt(np.sum(np.abs(c) ** 2)))
        row["hneg1"] = float(h_neg_norm(c, 1.0, c.ndim))
        for k, v in (extra or {}).items():
            row[k] = v[i]
        rows.append(row)
    return rows


__all__ = ["ConfigError", "SweepConfig", "load_config", "dump_config", "make_rng",
           "run_sweep", "aggregate", "check_suite", "CheckResult", "stopping_fraction",
           "limit_run", "trajectory_rows", "write_csv"]
