"""Monte Carlo harness: run configuration, estimators, fitting, persistence.

``run_experiment`` drives the compiled kernel over many noise realizations
and reduces them to a dephasing curve

    D(t) = |<a(t)>| / sqrt(<|a(t)|^2>),

with a jackknife standard error.  The normalization by the root-mean-square
amplitude removes the relaxation (mean-decay) part, leaving pure dephasing;
by construction D <= 1.
"""
from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numba
import numpy as np

from ._kernels import mc_dephasing_kernel
from ._version import __version__
from .diffusion import ThermalBathParams
from .dynamics import SolverConfig, _weights_for
from .ensemble import (
    EnsembleSpec,
    QubitParams,
    build_ensemble,
    check_band,
    mean_tls_count,
)
from .errors import ConfigError, NumericError, PreconditionError, SchemaError

_ENGINES = ("telegraph", "ka")
_MAX_FLIPS_PER_STEP = 1.0e3
_CSV_HEADER = "t_us,M,R,D,D_err"


@dataclass(frozen=True)
class GridSpec:
    """Output time grid, always starting at t = 0.

    ``kind`` is 'linear' (uniform spacing to ``stop``) or 'log'
    (t = 0 followed by ``points - 1`` log-spaced times covering ``decades``
    decades up to ``stop``).  Times are seconds.
    """

    stop: float
    points: int
    kind: str = "linear"
    decades: float | None = None

    def __post_init__(self) -> None:
        if not self.stop > 0.0:
            raise ConfigError("grid stop must be positive")
        if self.points < 2:
            raise ConfigError("grid needs at least 2 points")
        if self.kind not in ("linear", "log"):
            raise ConfigError("grid kind must be 'linear' or 'log'")
        if self.kind == "log":
            if self.decades is None or not self.decades > 0.0:
                raise ConfigError("log grids need decades > 0")
        elif self.decades is not None:
            raise ConfigError("decades applies only to log grids")

    def times(self) -> np.ndarray:
        if self.kind == "linear":
            return np.linspace(0.0, self.stop, self.points)
        start = self.stop * 10.0 ** (-self.decades)
        return np.concatenate(
            [[0.0], np.geomspace(start, self.stop, self.points - 1)]
        )


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one Monte Carlo experiment."""

    n_runs: int
    seed: int
    grid: GridSpec
    engine: str
    solver: SolverConfig
    ensemble: EnsembleSpec
    qubit: QubitParams
    resample_ensemble_per_run: bool = False
    n_fluctuators: int = 64

    def __post_init__(self) -> None:
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        if not 0 <= self.seed < 2**63:
            raise ConfigError("seed must lie in [0, 2^63)")
        if self.engine not in _ENGINES:
            raise ConfigError(f"engine must be one of {_ENGINES}")
        if self.n_fluctuators < 8:
            raise ConfigError("n_fluctuators must be >= 8")

    def bath(self) -> ThermalBathParams:
        return ThermalBathParams(
            kappa=self.ensemble.r_thermal,
            mu_av=self.ensemble.mu_av,
            mu_max=self.ensemble.mu_max,
            n_fluctuators=self.n_fluctuators,
        )


@dataclass
class DephasingCurve:
    """Estimated dephasing factor on a time grid.

    ``m_abs`` = |<a>|, ``r_rms`` = sqrt(<|a|^2>), ``d`` = m_abs/r_rms, and
    ``d_err`` is the jackknife standard error of d.
    """

    times: np.ndarray
    m_abs: np.ndarray
    r_rms: np.ndarray
    d: np.ndarray
    d_err: np.ndarray
    n_runs: int


@dataclass(frozen=True)
class FitResult:
    """Least-squares power-law fit of the dephasing exponent."""

    slope: float
    intercept: float
    stderr: float
    n_points: int
    window: tuple


def estimate_curve(times, a) -> DephasingCurve:
    """Reduce per-run amplitudes a[run, time] to a dephasing curve.

    |<a>| can exceed sqrt(<|a|^2>) only through floating-point noise (the
    exact inequality is guaranteed), so miniature overshoots are clamped and
    anything larger raises NumericError.
    """
    times = np.asarray(times, dtype=float)
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[1] != times.size:
        raise ConfigError("amplitudes must have shape (n_runs, n_times)")
    n = a.shape[0]
    s = np.sum(a, axis=0)
    q = np.sum(a.real**2 + a.imag**2, axis=0)
    m_raw = np.abs(s) / n
    r = np.sqrt(q / n)
    if np.any(m_raw > r * (1.0 + 1e-13) + 1e-300):
        raise NumericError("mean amplitude exceeded the RMS amplitude")
    m = np.minimum(m_raw, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(r > 0.0, m / r, np.nan)

    if n < 2:
        d_err = np.full(times.size, np.nan)
    else:
        abs2 = a.real**2 + a.imag**2
        num = np.abs(s[None, :] - a)
        den2 = np.maximum(q[None, :] - abs2, 0.0) * (n - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            d_i = num / np.sqrt(den2)
        d_i = np.minimum(d_i, 1.0)
        d_bar = np.mean(d_i, axis=0)
        d_err = np.sqrt((n - 1) / n * np.sum((d_i - d_bar) ** 2, axis=0))
        d_err = np.where(np.isfinite(d), d_err, np.nan)
    return DephasingCurve(times, m_raw, r, d, d_err, n)


def _kernel_inputs(cfg: RunConfig, ensemble_override):
    """Host-side preparation shared by every experiment."""
    spec, qubit = cfg.ensemble, cfg.qubit
    check_band(spec)
    if qubit.a_mod > 0.0 and (
        qubit.omega_mod <= spec.gamma or qubit.omega_mod <= spec.g_max
    ):
        raise PreconditionError(
            "fast-modulation condition omega_mod > gamma, g_max violated"
        )
    grid = cfg.grid.times()
    bath = cfg.bath()
    if (
        cfg.engine == "telegraph"
        and spec.mu_av > 0.0
        and cfg.n_fluctuators * bath.flip_rate * np.max(np.diff(grid))
        > _MAX_FLIPS_PER_STEP
    ):
        raise NumericError(
            "expected telegraph flips per grid step exceed "
            f"{_MAX_FLIPS_PER_STEP:g}; refine the grid or reduce the switching rate"
        )
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    if cfg.resample_ensemble_per_run:
        if ensemble_override is not None:
            raise ConfigError(
                "ensemble_override cannot be combined with per-run resampling"
            )
        nbar = mean_tls_count(spec)
        counts = rng.poisson(nbar, cfg.n_runs).astype(np.int64)
        eps0_fix = np.empty(0)
        g_fix = np.empty(0)
    else:
        ens = (
            list(ensemble_override)
            if ensemble_override is not None
            else build_ensemble(spec, qubit, rng)
        )
        counts = np.full(cfg.n_runs, len(ens), dtype=np.int64)
        eps0_fix = np.array([t.eps0 for t in ens], dtype=float)
        g_fix = np.array([t.g for t in ens], dtype=float)
    ms, jm2 = _weights_for(qubit, cfg.solver)
    if cfg.solver.dt is not None:
        dt_sub = cfg.solver.dt
    elif bath.m_rate > 0.0:
        dt_sub = min(0.02 / bath.kappa, 0.1 / (bath.m_rate * bath.rho))
    else:
        dt_sub = 0.02 / bath.kappa
    return grid, bath, counts, eps0_fix, g_fix, ms, jm2, dt_sub


def run_experiment(
    cfg: RunConfig, ensemble_override=None, n_threads: int | None = None
) -> DephasingCurve:
    """Run the Monte Carlo experiment described by ``cfg``.

    ``ensemble_override`` replaces the sampled TLS ensemble with an explicit
    list (the TLSs must share ``cfg.ensemble``'s gamma and diffusion spans,
    which are bath-level parameters).  Results are bit-reproducible for a
    given seed, independent of thread count.
    """
    if n_threads is not None:
        numba.set_num_threads(
            max(1, min(int(n_threads), numba.config.NUMBA_NUM_THREADS))
        )
    grid, bath, counts, eps0_fix, g_fix, ms, jm2, dt_sub = _kernel_inputs(
        cfg, ensemble_override
    )
    spec, qubit = cfg.ensemble, cfg.qubit
    out_a = np.empty((cfg.n_runs, grid.size), dtype=np.complex128)
    err_flags = np.zeros(cfg.n_runs, dtype=np.int64)
    mc_dephasing_kernel(
        np.uint64(cfg.seed),
        grid,
        counts,
        bool(cfg.resample_ensemble_per_run),
        eps0_fix,
        g_fix,
        qubit.e0,
        spec.band_halfwidth,
        spec.g_min,
        spec.g_max,
        spec.gamma,
        spec.mu_av,
        spec.mu_max,
        bath.kappa,
        np.int64(cfg.n_fluctuators),
        bath.b_min,
        np.int64(1 if cfg.engine == "ka" else 0),
        dt_sub,
        qubit.omega_mod,
        ms,
        jm2,
        out_a,
        err_flags,
    )
    if np.any(err_flags != 0):
        raise NumericError(
            f"coupling sampler stalled in {int(np.sum(err_flags != 0))} runs"
        )
    return estimate_curve(grid, out_a)


def fit_powerlaw(curve: DephasingCurve, window: tuple) -> FitResult:
    """Least-squares slope of log(-2 ln D) against log t inside ``window``.

    Requires at least 5 usable points with 0 < D < 1 strictly inside the
    window; the standard error is the usual one from the fit residuals.
    """
    lo, hi = float(window[0]), float(window[1])
    if not 0.0 < lo < hi:
        raise PreconditionError("window must satisfy 0 < lo < hi")
    mask = (curve.times >= lo) & (curve.times <= hi) & np.isfinite(curve.d)
    t = curve.times[mask]
    d = curve.d[mask]
    if np.any(d <= 0.0) or np.any(d >= 1.0):
        raise PreconditionError(
            "power-law fit needs 0 < D < 1 at every point in the window"
        )
    if t.size < 5:
        raise PreconditionError("power-law fit needs at least 5 points in the window")
    x = np.log(t)
    y = np.log(-2.0 * np.log(d))
    xbar = np.mean(x)
    sxx = np.sum((x - xbar) ** 2)
    slope = float(np.sum((x - xbar) * (y - np.mean(y))) / sxx)
    intercept = float(np.mean(y) - slope * xbar)
    resid = y - (intercept + slope * x)
    s2 = float(np.sum(resid**2) / (t.size - 2))
    stderr = math.sqrt(s2 / sxx)
    return FitResult(slope, intercept, stderr, int(t.size), (lo, hi))


def _config_dict(cfg: RunConfig) -> dict:
    return {
        "n_runs": cfg.n_runs,
        "seed": cfg.seed,
        "engine": cfg.engine,
        "resample_ensemble_per_run": cfg.resample_ensemble_per_run,
        "n_fluctuators": cfg.n_fluctuators,
        "grid": asdict(cfg.grid),
        "solver": asdict(cfg.solver),
        "ensemble": asdict(cfg.ensemble),
        "qubit": asdict(cfg.qubit),
    }


def persist_run(
    cfg: RunConfig, curve: DephasingCurve, path, timing_s: float | None = None
) -> Path:
    """Write a run record (JSON) plus its curve (sibling CSV); returns the JSON path."""
    path = Path(path)
    csv_path = path.with_suffix(".csv")
    record = {
        "schema_version": 1,
        "kind": "dephasim-run",
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "code_version": __version__,
        "seed": cfg.seed,
        "timing_s": timing_s,
        "n_runs": cfg.n_runs,
        "config": _config_dict(cfg),
        "curve_file": csv_path.name,
    }
    lines = [_CSV_HEADER]
    for i in range(curve.times.size):
        lines.append(
            ",".join(
                repr(float(v))
                for v in (
                    curve.times[i] * 1e6,
                    curve.m_abs[i],
                    curve.r_rms[i],
                    curve.d[i],
                    curve.d_err[i],
                )
            )
        )
    csv_path.write_text("\n".join(lines) + "\n")
    path.write_text(json.dumps(record, indent=2) + "\n")
    return path


def _config_from_dict(d: dict) -> RunConfig:
    try:
        return RunConfig(
            n_runs=d["n_runs"],
            seed=d["seed"],
            grid=GridSpec(**d["grid"]),
            engine=d["engine"],
            solver=SolverConfig(**d["solver"]),
            ensemble=EnsembleSpec(**d["ensemble"]),
            qubit=QubitParams(**d["qubit"]),
            resample_ensemble_per_run=d["resample_ensemble_per_run"],
            n_fluctuators=d["n_fluctuators"],
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"run record config is malformed: {exc}") from exc


def load_run(path) -> tuple[RunConfig, DephasingCurve, dict]:
    """Load a persisted run; the grid is regenerated exactly from the config."""
    path = Path(path)
    record = json.loads(path.read_text())
    if not isinstance(record, dict) or record.get("kind") != "dephasim-run":
        raise SchemaError("not a dephasim run record")
    if record.get("schema_version") != 1:
        raise SchemaError(
            f"unsupported schema_version {record.get('schema_version')!r}"
        )
    cfg = _config_from_dict(record["config"])
    csv_path = path.parent / record["curve_file"]
    lines = csv_path.read_text().strip().split("\n")
    if not lines or lines[0] != _CSV_HEADER:
        raise SchemaError(f"curve file must start with header '{_CSV_HEADER}'")
    rows = [[float(v) for v in line.split(",")] for line in lines[1:]]
    data = np.array(rows, dtype=float).reshape(len(rows), 5)
    times = cfg.grid.times()
    if times.size != data.shape[0]:
        raise SchemaError("curve file length does not match the config grid")
    curve = DephasingCurve(
        times=times,
        m_abs=data[:, 1],
        r_rms=data[:, 2],
        d=data[:, 3],
        d_err=data[:, 4],
        n_runs=int(record["n_runs"]),
    )
    return cfg, curve, record
