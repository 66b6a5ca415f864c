"""Command-line interface.

Configs are INI files with human-friendly units (MHz for frequencies —
converted to angular rad/s internally — microseconds for times, Kelvin for
temperatures).  Exit codes: 0 on success, 2 for configuration or domain
errors, 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import analytics, diffusion, dynamics
from ._version import __version__
from .analytics import LawParams, TemperatureCalibration
from .dynamics import SolverConfig
from .ensemble import EnsembleSpec, QubitParams, build_ensemble
from .errors import ConfigError, NumericError, PreconditionError
from .harness import (
    GridSpec,
    RunConfig,
    fit_powerlaw,
    persist_run,
    run_experiment,
)

TWO_PI_MHZ = math.tau * 1e6  # rad/s per MHz

_REQUIRED = object()

_SCHEMA = {
    "qubit": {"e0_mhz": float, "a_mod_mhz": float, "omega_mod_mhz": float},
    "ensemble": {
        "delta_typ_mhz": float,
        "g_max_mhz": float,
        "g_min_mhz": float,
        "band_halfwidth_mhz": float,
        "gamma_mhz": float,
        "mu_av_mhz": float,
        "mu_max_mhz": float,
    },
    "bath": {"t1_thermal_us": float, "n_fluctuators": int},
    "solver": {"dt_us": float, "m_max": int, "mode": str, "bessel_tol": float},
    "run": {
        "n_runs": int,
        "seed": int,
        "engine": str,
        "grid_stop_us": float,
        "grid_points": int,
        "grid_kind": str,
        "grid_decades": float,
        "resample_ensemble_per_run": bool,
    },
    "sweep": {
        "t_min_k": float,
        "t_max_k": float,
        "points": int,
        "c_mu_mhz_per_k": float,
        "c_r_per_k3_s": float,
        "mod_ratio": float,
    },
}

_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


class CliConfig:
    """Typed view of a parsed INI config, in the file's original units."""

    def __init__(self, sections: dict):
        self.sections = sections

    def get(self, section: str, key: str, default=_REQUIRED):
        value = self.sections.get(section, {}).get(key, _REQUIRED)
        if value is not _REQUIRED:
            return value
        if default is _REQUIRED:
            raise ConfigError(f"missing required key '{key}' in section [{section}]")
        return default

    def dumps(self) -> str:
        lines = []
        for section, keys in _SCHEMA.items():
            if section not in self.sections:
                continue
            lines.append(f"[{section}]")
            for key in keys:
                if key not in self.sections[section]:
                    continue
                val = self.sections[section][key]
                if isinstance(val, bool):
                    text = "true" if val else "false"
                elif isinstance(val, float):
                    text = repr(val)
                else:
                    text = str(val)
                lines.append(f"{key} = {text}")
            lines.append("")
        return "\n".join(lines)


def _convert(section: str, key: str, raw: str):
    typ = _SCHEMA[section][key]
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(
            f"bad value for '{key}' in section [{section}]: {exc}"
        ) from exc


def load_cli_config(path) -> CliConfig:
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#", ";"), interpolation=None
    )
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"could not parse config {path}: {exc}") from exc
    if not read:
        raise ConfigError(f"config file not found: {path}")
    sections: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        out = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            out[key] = _convert(section, key, raw)
        sections[section] = out
    return CliConfig(sections)


def qubit_from_config(cfg: CliConfig) -> QubitParams:
    return QubitParams(
        e0=cfg.get("qubit", "e0_mhz") * TWO_PI_MHZ,
        a_mod=cfg.get("qubit", "a_mod_mhz", 0.0) * TWO_PI_MHZ,
        omega_mod=cfg.get("qubit", "omega_mod_mhz", 0.0) * TWO_PI_MHZ,
    )


def ensemble_from_config(cfg: CliConfig) -> EnsembleSpec:
    g_min = cfg.get("ensemble", "g_min_mhz", None)
    return EnsembleSpec(
        delta_typ=cfg.get("ensemble", "delta_typ_mhz") * TWO_PI_MHZ,
        g_max=cfg.get("ensemble", "g_max_mhz") * TWO_PI_MHZ,
        band_halfwidth=cfg.get("ensemble", "band_halfwidth_mhz") * TWO_PI_MHZ,
        gamma=cfg.get("ensemble", "gamma_mhz") * TWO_PI_MHZ,
        mu_av=cfg.get("ensemble", "mu_av_mhz") * TWO_PI_MHZ,
        mu_max=cfg.get("ensemble", "mu_max_mhz") * TWO_PI_MHZ,
        r_thermal=1.0 / (cfg.get("bath", "t1_thermal_us") * 1e-6),
        g_min=None if g_min is None else g_min * TWO_PI_MHZ,
    )


def solver_from_config(cfg: CliConfig) -> SolverConfig:
    dt_us = cfg.get("solver", "dt_us", None)
    return SolverConfig(
        dt=None if dt_us is None else dt_us * 1e-6,
        m_max=cfg.get("solver", "m_max", 512),
        mode=cfg.get("solver", "mode", "markov"),
        bessel_tol=cfg.get("solver", "bessel_tol", 1e-12),
    )


def grid_from_config(cfg: CliConfig) -> GridSpec:
    kind = cfg.get("run", "grid_kind", "linear")
    decades = cfg.get("run", "grid_decades", None) if kind == "log" else None
    if kind == "log" and decades is None:
        raise ConfigError("missing required key 'grid_decades' in section [run]")
    return GridSpec(
        stop=cfg.get("run", "grid_stop_us") * 1e-6,
        points=cfg.get("run", "grid_points"),
        kind=kind,
        decades=decades,
    )


def runconfig_from_config(cfg: CliConfig) -> RunConfig:
    return RunConfig(
        n_runs=cfg.get("run", "n_runs"),
        seed=cfg.get("run", "seed"),
        grid=grid_from_config(cfg),
        engine=cfg.get("run", "engine", "telegraph"),
        solver=solver_from_config(cfg),
        ensemble=ensemble_from_config(cfg),
        qubit=qubit_from_config(cfg),
        resample_ensemble_per_run=cfg.get("run", "resample_ensemble_per_run", False),
        n_fluctuators=cfg.get("bath", "n_fluctuators", 64),
    )


def sweep_inputs_from_config(cfg: CliConfig):
    base = LawParams.from_ensemble_spec(ensemble_from_config(cfg))
    cal = TemperatureCalibration(
        c_mu=cfg.get("sweep", "c_mu_mhz_per_k") * TWO_PI_MHZ,
        c_r=cfg.get("sweep", "c_r_per_k3_s"),
    )
    t_min = cfg.get("sweep", "t_min_k")
    t_max = cfg.get("sweep", "t_max_k")
    points = cfg.get("sweep", "points")
    if not 0.0 < t_min < t_max:
        raise ConfigError("sweep needs 0 < t_min_k < t_max_k")
    if points < 2:
        raise ConfigError("sweep needs at least 2 points")
    temps = np.geomspace(t_min, t_max, points)
    return base, cal, temps, cfg.get("sweep", "mod_ratio", 0.0)


def _threads_from(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("DEPHASIM_THREADS")
    return int(env) if env else None


def _write_gnuplot(path: Path, csv_name: str, xlabel: str, ylabel: str, ycol: int,
                   logscale: str) -> None:
    lines = [
        "set datafile separator ','",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
    ]
    if logscale:
        lines.append(f"set logscale {logscale}")
    lines.append(
        f"plot '{csv_name}' skip 1 using 1:{ycol} with linespoints title '{ylabel}'"
    )
    path.write_text("\n".join(lines) + "\n")


def _simulate_summary(cfg: RunConfig, curve) -> str:
    spec = cfg.ensemble
    t_tilde = math.nan
    classification = "no-diffusion"
    exponent = math.nan
    if spec.mu_av > 0.0:
        params = LawParams.from_ensemble_spec(spec)
        report = analytics.crossover_diagnostics(params, cfg.qubit.mod_ratio)
        t_tilde = report.t_crossover
        classification = report.classification
        window = (0.01 * t_tilde, min(0.3 * t_tilde, cfg.grid.stop))
        try:
            exponent = fit_powerlaw(curve, window).slope
        except PreconditionError:
            exponent = math.nan
    return (
        f"t_tilde_us={t_tilde * 1e6:.6g} "
        f"classification={classification} "
        f"short_time_exponent={exponent:.6g}"
    )


def _dump_trajectory(cfg: RunConfig, path: Path) -> None:
    bath = cfg.bath()
    engine = (
        diffusion.TelegraphEngine(bath)
        if cfg.engine == "telegraph"
        else diffusion.KaEngine(bath, dt=cfg.solver.dt)
    )
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    traj = engine.realize(cfg.grid.times(), rng)
    lines = ["t_us,x_MHz,y_MHz"]
    for i in range(traj.times.size):
        lines.append(
            f"{repr(float(traj.times[i]) * 1e6)},{repr(float(traj.x) / TWO_PI_MHZ)},"
            f"{repr(float(traj.y[i]) / TWO_PI_MHZ)}"
        )
    path.write_text("\n".join(lines) + "\n")


def _cmd_simulate(args) -> int:
    cfg = runconfig_from_config(load_cli_config(args.config))
    t0 = time.perf_counter()
    curve = run_experiment(cfg, n_threads=_threads_from(args))
    timing = time.perf_counter() - t0
    out = Path(args.out)
    persist_run(cfg, curve, out, timing_s=timing)
    if args.dump_trajectory:
        _dump_trajectory(cfg, Path(args.dump_trajectory))
    if args.gnuplot:
        _write_gnuplot(
            out.with_suffix(".gp"),
            out.with_suffix(".csv").name,
            "t [us]",
            "D",
            4,
            "",
        )
    print(_simulate_summary(cfg, curve))
    print(f"wrote {out} ({cfg.n_runs} runs, {timing:.2f} s)")
    return 0


def _cmd_analytic(args) -> int:
    cfg = load_cli_config(args.config)
    params = LawParams.from_ensemble_spec(ensemble_from_config(cfg))
    x_mod = (
        args.x_mod if args.x_mod is not None else qubit_from_config(cfg).mod_ratio
    )
    times = grid_from_config(cfg).times()
    values, branches = analytics.dephasing_law_curve(params, x_mod, times)
    out = Path(args.out)
    lines = ["t_us,neg2lnD,branch_id"]
    for i in range(times.size):
        lines.append(
            f"{repr(float(times[i]) * 1e6)},{repr(float(values[i]))},{int(branches[i])}"
        )
    out.write_text("\n".join(lines) + "\n")
    if args.gnuplot:
        _write_gnuplot(
            out.with_suffix(".gp"), out.name, "t [us]", "-2 ln D", 2, "xy"
        )
    print(f"t_tilde_us={params.t_crossover * 1e6:.6g}")
    print(f"wrote {out}")
    return 0


def _cmd_regime(args) -> int:
    cfg = load_cli_config(args.config)
    params = LawParams.from_ensemble_spec(ensemble_from_config(cfg))
    x_mod = qubit_from_config(cfg).mod_ratio
    report = analytics.crossover_diagnostics(params, x_mod)
    print(
        json.dumps(
            {
                "t_tilde_us": report.t_crossover * 1e6,
                "neg2lnd_at_crossover": report.neg2lnd_at_crossover,
                "markov_number": report.markov_number,
                "markov_ok": report.markov_ok,
                "classification": report.classification,
                "gamma_1q_per_s": report.gamma_1q,
                "gamma_phi_per_s": report.gamma_phi,
            },
            indent=None if args.compact else 2,
        )
    )
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_cli_config(args.config)
    base, cal, temps, x_mod = sweep_inputs_from_config(cfg)
    result = analytics.temperature_sweep(base, cal, temps, x_mod)
    out = Path(args.out)
    lines = ["T_K,gamma_phi,gamma_phi_long"]
    for i in range(result.temps.size):
        lines.append(
            f"{repr(float(result.temps[i]))},{repr(float(result.gamma_phi[i]))},"
            f"{repr(float(result.gamma_phi_long[i]))}"
        )
    out.write_text("\n".join(lines) + "\n")
    if args.gnuplot:
        _write_gnuplot(out.with_suffix(".gp"), out.name, "T [K]", "gamma_phi", 2, "xy")
    peak = int(np.nanargmax(result.gamma_phi))
    print(
        f"peak gamma_phi={result.gamma_phi[peak]:.6g} /s "
        f"at T={result.temps[peak]:.6g} K"
    )
    print(f"wrote {out}")
    return 0


def _cmd_oracle_diffusion(args) -> int:
    from scipy import stats

    cfg = load_cli_config(args.config)
    spec = ensemble_from_config(cfg)
    if spec.mu_av <= 0.0:
        raise ConfigError("diffusion oracle needs mu_av > 0")
    bath = diffusion.ThermalBathParams(
        kappa=spec.r_thermal,
        mu_av=spec.mu_av,
        mu_max=spec.mu_max,
        n_fluctuators=cfg.get("bath", "n_fluctuators", 64),
    )
    n = args.samples
    rng = np.random.Generator(np.random.Philox(key=args.seed))

    t_short = 0.05 / bath.kappa
    _, y_short = diffusion.telegraph_marginal_samples(bath, t_short, n, rng)
    ks_short = stats.kstest(
        y_short, lambda v: stats.cauchy.cdf(v, scale=bath.m_rate * t_short)
    ).statistic

    t_long = 10.0 / bath.kappa
    xs, ys = diffusion.telegraph_marginal_samples(bath, t_long, n, rng)
    theta = math.atan(bath.mu_max / bath.mu_av)
    ks_stat = stats.kstest(
        xs + ys,
        lambda v: (np.arctan(np.clip(v, -bath.mu_max, bath.mu_max) / bath.mu_av)
                   + theta) / (2.0 * theta),
    ).statistic

    # Compare engines at a moderate flip parity: the telegraph marginal
    # deviates from the exact Cauchy shape at second order in the parity,
    # so late times would measure that model difference, not a bug.
    t_mid = 0.5 / bath.kappa
    _, y_tel = diffusion.telegraph_marginal_samples(bath, t_mid, n, rng)
    dt = min(0.02 / bath.kappa, 0.1 / (bath.m_rate * bath.rho))
    nstep = int(math.ceil(t_mid / dt))
    y_ka = np.zeros(n)
    for _ in range(nstep):
        y_ka = diffusion.ka_step(y_ka, t_mid / nstep, bath, rng)
    two = stats.ks_2samp(y_tel, y_ka)

    report = {
        "ks_short_time": float(ks_short),
        "ks_stationary": float(ks_stat),
        "ks_engines_2samp": float(two.statistic),
        "p_engines": float(two.pvalue),
        "samples": n,
        "pass": bool(ks_short < 0.02 and ks_stat < 0.02),
    }
    print(json.dumps(report, indent=2))
    return 0 if report["pass"] else 1


def _cmd_validate(args) -> int:
    cfg = runconfig_from_config(load_cli_config(args.config))
    spec, qubit = cfg.ensemble, cfg.qubit
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    ens = build_ensemble(spec, qubit, rng)
    if args.tls is not None:
        ens = ens[: args.tls]
    if len(ens) > 64:
        raise ConfigError(
            f"full-solver validation is limited to 64 TLSs; the sampled ensemble "
            f"has {len(ens)} (use --tls to truncate)"
        )
    grid = cfg.grid.times()
    if args.t_stop_us is not None:
        stop = args.t_stop_us * 1e-6
        grid = grid[grid <= stop]
        if grid.size < 2:
            raise ConfigError("--t-stop-us leaves fewer than 2 grid points")
    bath = cfg.bath()
    engine = (
        diffusion.TelegraphEngine(bath)
        if cfg.engine == "telegraph"
        else diffusion.KaEngine(bath, dt=cfg.solver.dt)
    )
    markov, trajectories = dynamics.evolve_markov_trajectories(
        ens, qubit, engine, grid, rng, cfg.solver
    )
    full = dynamics.evolve_full(ens, qubit, trajectories, grid)
    dev = np.abs(markov.a - full.a) / np.abs(full.a)
    worst = int(np.argmax(dev))
    report = {
        "max_rel_deviation": float(dev[worst]),
        "at_t_us": float(grid[worst] * 1e6),
        "n_tls": len(ens),
        "pass": bool(dev[worst] < args.tol),
    }
    print(json.dumps(report, indent=2))
    return 0 if report["pass"] else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dephasim",
        description=(
            "Monte Carlo and closed-form estimates of qubit pure dephasing from "
            "spectrally diffusing two-level systems"
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the Monte Carlo experiment from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output record path (JSON; CSV sibling)")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--dump-trajectory", default=None, metavar="CSV")
    p.add_argument("--gnuplot", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analytic", help="tabulate the closed-form dephasing law")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--x-mod", type=float, default=None, dest="x_mod")
    p.add_argument("--gnuplot", action="store_true")
    p.set_defaults(func=_cmd_analytic)

    p = sub.add_parser("regime", help="print regime diagnostics as JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--compact", action="store_true")
    p.set_defaults(func=_cmd_regime)

    p = sub.add_parser("sweep", help="temperature sweep of the dephasing rate")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gnuplot", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser(
        "oracle-diffusion", help="distribution checks of the diffusion engines"
    )
    p.add_argument("--config", required=True)
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=_cmd_oracle_diffusion)

    p = sub.add_parser(
        "validate", help="cross-check the Markov route against the full solver"
    )
    p.add_argument("--config", required=True)
    p.add_argument("--tls", type=int, default=None)
    p.add_argument("--t-stop-us", type=float, default=None, dest="t_stop_us")
    p.add_argument("--tol", type=float, default=0.05)
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
