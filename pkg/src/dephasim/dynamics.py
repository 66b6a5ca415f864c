"""Qubit amplitude evolution under spectrally diffusing TLSs.

Two routes compute the amplitude a(t) for the same shift trajectories:

* The Markov route integrates the instantaneous decay coefficient C(eps(t))
  along each trajectory.  Because the engines produce piecewise-constant
  shifts and C depends on time only through the shift, the phase integral is
  accumulated exactly segment by segment.
* ``evolve_full`` integrates the underlying Schroedinger equation (qubit plus
  explicit TLS amplitudes, in the frame rotating with the drive phase) and
  serves as the ground truth the Markov route is validated against.

The hot Monte Carlo path lives in the compiled kernel (see harness);
functions here are the readable reference implementations and oracles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.integrate import solve_ivp

from .diffusion import ShiftTrajectory, _validate_grid
from .ensemble import QubitParams, TlsParams
from .errors import ConfigError, NumericError, PreconditionError

_MAX_FULL_TLS = 64


@dataclass(frozen=True)
class SolverConfig:
    """Numerical knobs of the amplitude evolution.

    ``dt`` caps the sub-step of the fast analytic engine (None picks a safe
    default from the bath parameters), ``m_max`` bounds the number of
    modulation sidebands, ``bessel_tol`` is the neglected sideband weight.
    """

    dt: float | None = None
    m_max: int = 512
    mode: str = "markov"
    bessel_tol: float = 1e-12

    def __post_init__(self) -> None:
        if self.dt is not None and not self.dt > 0.0:
            raise ConfigError("dt must be positive when given")
        if self.m_max < 0:
            raise ConfigError("m_max must be >= 0")
        if self.mode not in ("markov", "full"):
            raise ConfigError("mode must be 'markov' or 'full'")
        if not 0.0 < self.bessel_tol <= 1e-3:
            raise ConfigError("bessel_tol must lie in (0, 1e-3]")


@dataclass
class AmplitudeRecord:
    """Amplitude a(t) of one realization on an output grid."""

    times: np.ndarray
    a: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.a = np.asarray(self.a, dtype=complex)
        if self.times.ndim != 1 or self.times.shape != self.a.shape:
            raise ConfigError("times and a must be 1-D arrays of equal length")
        if abs(self.a[0] - 1.0) > 1e-12:
            raise NumericError("amplitude must start at 1")
        if np.max(np.abs(self.a)) > 1.0 + 1e-9:
            raise NumericError("amplitude exceeded the unit bound")


def bessel_weights(x: float, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Sideband orders and squared Bessel weights for drive ratio x = A/Omega.

    Returns (ms, jm2) with jm2[i] = J_{ms[i]}(x)^2, truncated symmetrically so
    the neglected weight 1 - sum(jm2) is below ``tol`` (the weights sum to 1
    exactly over all orders).
    """
    if x < 0.0:
        raise PreconditionError("drive ratio must be >= 0")
    if x == 0.0:
        return np.array([0], dtype=np.int64), np.array([1.0])
    m_hi = int(math.ceil(x)) + 20
    while True:
        orders = np.arange(0, m_hi + 1)
        j = special.jv(orders, x)
        j2 = j * j
        total = np.concatenate([[j2[0]], j2[0] + 2.0 * np.cumsum(j2[1:])])
        hit = np.nonzero(total >= 1.0 - tol)[0]
        if hit.size:
            m = int(hit[0])
            break
        m_hi *= 2
        if m_hi > 1 << 20:
            raise NumericError("sideband truncation did not converge")
    ms = np.arange(-m, m + 1, dtype=np.int64)
    jm = special.jv(np.abs(ms), x)
    return ms, jm * jm


def s4_factor(x: float) -> float:
    """Fourth-power Bessel sum sum_m J_m(x)^4 (equals 1 at x = 0, ~ 1/x at large x)."""
    if x < 0.0:
        raise PreconditionError("drive ratio must be >= 0")
    if x == 0.0:
        return 1.0
    m_hi = int(math.ceil(x)) + 30
    j = special.jv(np.arange(0, m_hi + 1), x)
    j4 = j**4
    return float(j4[0] + 2.0 * np.sum(j4[1:]))


def _weights_for(
    qubit: QubitParams, solver: SolverConfig
) -> tuple[np.ndarray, np.ndarray]:
    ms, jm2 = bessel_weights(qubit.mod_ratio, solver.bessel_tol)
    if ms[-1] > solver.m_max:
        raise ConfigError(
            f"drive ratio {qubit.mod_ratio:g} needs {int(ms[-1])} sidebands for "
            f"bessel_tol={solver.bessel_tol:g}; raise m_max or loosen the tolerance"
        )
    return ms, jm2


def coefficient_c(tls: TlsParams, qubit: QubitParams, eps_t, weights=None):
    """Instantaneous Markov decay coefficient C for splitting(s) eps_t.

    C = (g^2/4) * sum_m J_m(A/Omega)^2 / (gamma - i*(e0 - eps_t + m*Omega)).
    Re C > 0 always, so the Markov amplitude never exceeds 1.
    """
    if weights is None:
        weights = bessel_weights(qubit.mod_ratio)
    ms, jm2 = weights
    deff = np.asarray(qubit.e0 - np.asarray(eps_t, dtype=float))
    dm = deff[..., None] + ms * qubit.omega_mod
    terms = jm2 / (tls.gamma - 1j * dm)
    out = 0.25 * tls.g**2 * np.sum(terms, axis=-1)
    return complex(out) if out.ndim == 0 else out


def check_markov_validity(ensemble, qubit: QubitParams) -> None:
    """Raise PreconditionError where the Markov route's assumptions fail.

    Requires weak coupling g <= gamma for every TLS and, when the drive is
    on, fast modulation Omega > gamma and Omega > g.
    """
    bad = [i for i, t in enumerate(ensemble) if t.g > t.gamma]
    if bad:
        raise PreconditionError(
            f"weak-coupling condition g <= gamma violated for TLS indices {bad}"
        )
    if qubit.a_mod > 0.0:
        bad = [
            i
            for i, t in enumerate(ensemble)
            if qubit.omega_mod <= t.gamma or qubit.omega_mod <= t.g
        ]
        if bad:
            raise PreconditionError(
                "fast-modulation condition omega_mod > gamma, g violated for "
                f"TLS indices {bad}"
            )


def _markov_phase_on_grid(
    tls: TlsParams,
    qubit: QubitParams,
    traj: ShiftTrajectory,
    grid: np.ndarray,
    weights,
) -> np.ndarray:
    """Exact phase integral int_0^t C(eps(t')) dt' of one TLS on the grid.

    The trajectory is piecewise constant, so the integral is a cumulative sum
    of C * segment-duration; the grid points must appear among the trajectory
    times (both engines guarantee this).
    """
    eps = tls.eps0 + traj.x + traj.y
    c = coefficient_c(tls, qubit, eps, weights)
    cum = np.concatenate([[0.0 + 0.0j], np.cumsum(c[:-1] * np.diff(traj.times))])
    idx = np.searchsorted(traj.times, grid)
    if np.any(idx >= traj.times.size) or np.any(traj.times[idx] != grid):
        raise PreconditionError("trajectory times must contain every grid point")
    return cum[idx]


def evolve_markov_trajectories(
    ensemble,
    qubit: QubitParams,
    engine,
    grid,
    rng: np.random.Generator,
    solver: SolverConfig | None = None,
) -> tuple[AmplitudeRecord, list[ShiftTrajectory]]:
    """Markov amplitude plus the shift trajectories it was computed from.

    Draws one trajectory per TLS from ``engine`` and accumulates the total
    phase; returning the trajectories lets ``evolve_full`` be run on exactly
    the same noise realization.
    """
    if solver is None:
        solver = SolverConfig()
    grid = _validate_grid(grid)
    check_markov_validity(ensemble, qubit)
    weights = _weights_for(qubit, solver)
    phase = np.zeros(grid.size, dtype=complex)
    trajectories = []
    for tls in ensemble:
        traj = engine.realize(grid, rng)
        trajectories.append(traj)
        phase += _markov_phase_on_grid(tls, qubit, traj, grid, weights)
    record = AmplitudeRecord(grid, np.exp(-phase), meta={"mode": "markov"})
    return record, trajectories


def evolve_markov(
    ensemble,
    qubit: QubitParams,
    engine,
    grid,
    rng: np.random.Generator,
    solver: SolverConfig | None = None,
) -> AmplitudeRecord:
    """Single-realization Markov amplitude on the grid (reference path)."""
    record, _ = evolve_markov_trajectories(ensemble, qubit, engine, grid, rng, solver)
    return record


def evolve_full(
    ensemble,
    qubit: QubitParams,
    trajectories,
    grid,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> AmplitudeRecord:
    """Integrate the coupled qubit-TLS Schroedinger equation on given trajectories.

    Works in the frame rotating with the qubit drive phase, where the state is
    (a, b_1 .. b_N) with

        da/dt   = -(i/2) * sum_n g_n b_n
        db_n/dt = [i*(e0 - eps_n(t) + A*cos(Omega*t)) - gamma_n] b_n - (i/2) g_n a

    and eps_n(t) is piecewise constant from the supplied trajectories.  The
    norm |a|^2 + sum |b|^2 can only decrease; its violation signals an
    integration failure.
    """
    grid = _validate_grid(grid)
    n = len(ensemble)
    if n > _MAX_FULL_TLS:
        raise PreconditionError(
            f"the full solver is limited to {_MAX_FULL_TLS} TLSs (got {n})"
        )
    if len(trajectories) != n:
        raise ConfigError("need exactly one trajectory per TLS")

    g = np.array([t.g for t in ensemble])
    delta = np.array([qubit.e0 - t.eps0 for t in ensemble])
    gam = np.array([t.gamma for t in ensemble])
    a_mod, om = qubit.a_mod, qubit.omega_mod

    boundaries = grid
    for traj in trajectories:
        boundaries = np.union1d(boundaries, traj.times[traj.times <= grid[-1]])

    def rhs(t, z, shift):
        bt = z[1:]
        mod = a_mod * math.cos(om * t) if a_mod > 0.0 else 0.0
        da = -0.5j * np.sum(g * bt)
        db = (1j * (delta + mod - shift) - gam) * bt - 0.5j * g * z[0]
        return np.concatenate(([da], db))

    state = np.zeros(n + 1, dtype=complex)
    state[0] = 1.0
    out = np.empty(grid.size, dtype=complex)
    out[0] = 1.0
    for i in range(boundaries.size - 1):
        t0, t1 = boundaries[i], boundaries[i + 1]
        shift = np.array([tr.x + tr.sample_at(t0) for tr in trajectories])
        sol = solve_ivp(
            rhs,
            (t0, t1),
            state,
            method="DOP853",
            t_eval=[t1],
            rtol=rtol,
            atol=atol,
            args=(shift,),
        )
        if not sol.success:
            raise NumericError(f"full solver failed on [{t0:g}, {t1:g}]: {sol.message}")
        state = sol.y[:, -1]
        norm = np.sum(np.abs(state) ** 2)
        if norm > 1.0 + 1e-8:
            raise NumericError("full solver violated the decreasing-norm invariant")
        pos = np.searchsorted(grid, t1)
        if pos < grid.size and grid[pos] == t1:
            out[pos] = state[0]
    return AmplitudeRecord(grid, out, meta={"mode": "full"})


def two_level_exact(g: float, gamma: float, t) -> np.ndarray:
    """Closed-form resonant amplitude of a qubit coupled to one lossy TLS.

    With detuning zero and no diffusion, a(t) = (lp*exp(lm*t) - lm*exp(lp*t))
    / (lp - lm) where lp, lm = (-gamma +- sqrt(gamma^2 - g^2))/2.  Oracle for
    both evolution routes.
    """
    t = np.asarray(t, dtype=float)
    disc = complex(gamma * gamma - g * g) ** 0.5
    lp = 0.5 * (-gamma + disc)
    lm = 0.5 * (-gamma - disc)
    if lp == lm:
        return np.exp(lp * t) * (1.0 - lm * t)
    return (lp * np.exp(lm * t) - lm * np.exp(lp * t)) / (lp - lm)
