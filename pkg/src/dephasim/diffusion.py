"""Spectral-diffusion engines and reference densities.

Two engines generate the shift trajectory eps(t) = eps0 + x + y(t) of a
quantum TLS:

* ``telegraph_realization`` simulates a microscopic bath of symmetric
  two-state fluctuators with inverse-square distributed couplings.  It is the
  canonical engine; the other one is validated against it.
* ``ka_step`` advances y by heavy-tailed (Lorentzian) increments with mean
  reversion.  It reproduces the telegraph marginal of y(t) at all times but
  treats the joint statistics of (x, y) approximately, so it is a fast
  approximation rather than ground truth.

The closed-form helpers (``propagator_density``, ``stationary_density``,
``width_function``) serve as test oracles rather than hot-path code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import ConfigError, NumericError, PreconditionError

_EULER_GAMMA = 0.5772156649015328606

# Guard for pathological run configurations: event-driven flips never alias a
# coarse grid, but this many expected flips per output step means the caller's
# grid and switching rate are wildly mismatched.
_MAX_FLIPS_PER_STEP = 1.0e3


@dataclass(frozen=True)
class ThermalBathParams:
    """Thermal-fluctuator bath attached to one quantum TLS.

    ``kappa`` is the fluctuator switching rate (the state autocorrelation of
    each fluctuator decays as exp(-kappa*t)), ``mu_av``/``mu_max`` are the
    typical and maximal spectral-diffusion spans, and ``n_fluctuators`` is the
    number of telegraph fluctuators used by the microscopic engine.
    """

    kappa: float
    mu_av: float
    mu_max: float
    n_fluctuators: int = 64

    def __post_init__(self) -> None:
        if not self.kappa > 0.0:
            raise ConfigError("kappa must be positive")
        if self.mu_av < 0.0:
            raise ConfigError("mu_av must be >= 0")
        if self.mu_max < self.mu_av:
            raise ConfigError("mu_max must be >= mu_av")
        if self.mu_av > 0.0 and not self.mu_max > 0.0:
            raise ConfigError("mu_max must be positive when mu_av > 0")
        if self.n_fluctuators < 8:
            raise ConfigError("the microscopic engine needs n_fluctuators >= 8")

    @property
    def rho(self) -> float:
        """Inverse maximal span, 1/mu_max."""
        return 1.0 / self.mu_max if self.mu_max > 0.0 else math.inf

    @property
    def m_rate(self) -> float:
        """Diffusion rate mu_av*kappa: short-time propagator width grows as m_rate*t."""
        return self.mu_av * self.kappa

    @property
    def flip_rate(self) -> float:
        """Per-fluctuator flip rate.

        A symmetric telegraph state flipping at rate lambda decorrelates as
        exp(-2*lambda*t); lambda = kappa/2 makes the bath decorrelate at rate
        kappa, which also fixes the short-time propagator width to m_rate*t.
        """
        return 0.5 * self.kappa

    @property
    def b_min(self) -> float:
        """Smallest fluctuator coupling.

        Couplings are drawn from a density ~ 1/b^2 on [b_min, mu_max]
        (uniform-in-volume placement of inverse-cube couplings); b_min is
        calibrated so the stationary sum over fluctuators has Lorentzian
        half-width mu_av.
        """
        if self.mu_av == 0.0:
            return 0.0
        return 1.0 / (
            math.pi * self.n_fluctuators / (2.0 * self.mu_av) + 1.0 / self.mu_max
        )


@dataclass
class ShiftTrajectory:
    """Piecewise-constant shift history of one TLS in one realization.

    ``y`` takes the value ``y[i]`` on the interval ``[times[i], times[i+1])``
    (and ``y[-1]`` from ``times[-1]`` on); ``x`` is the frozen shift drawn at
    t = 0, and ``y(0) = 0`` exactly.
    """

    times: np.ndarray
    x: float
    y: np.ndarray

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.y.shape:
            raise ConfigError("times and y must be 1-D arrays of equal length")
        if self.times.size == 0 or self.times[0] != 0.0:
            raise ConfigError("trajectory must start at t = 0")
        if np.any(np.diff(self.times) <= 0.0):
            raise ConfigError("trajectory times must be strictly increasing")
        if self.y[0] != 0.0:
            raise ConfigError("dynamic shift must vanish exactly at t = 0")

    def sample_at(self, t):
        """Value of y at time(s) t under the piecewise-constant convention."""
        idx = np.searchsorted(self.times, t, side="right") - 1
        idx = np.clip(idx, 0, self.y.size - 1)
        return self.y[idx]

    @property
    def total(self) -> np.ndarray:
        """x + y(t) on the stored grid."""
        return self.x + self.y


@dataclass(frozen=True)
class WidthParams:
    """Inputs of the propagator width function.

    ``t1_min`` is the relaxation time of the fastest thermal fluctuators;
    slower ones (scaled energy y) relax at the reduced rate ~ y^3*coth(y).
    """

    t1_min: float
    mu_av: float

    def __post_init__(self) -> None:
        if not self.t1_min > 0.0:
            raise ConfigError("t1_min must be positive")
        if self.mu_av < 0.0:
            raise ConfigError("mu_av must be >= 0")


def sample_static_shift(bath: ThermalBathParams, rng: np.random.Generator, size=None):
    """Draw the frozen shift x from a Lorentzian of half-width mu_av truncated at mu_max.

    Inverse-CDF sampling of the truncated, renormalized Lorentzian; the hard
    cutoff stands in for the faster-than-Lorentzian decay of the exact
    stationary density near mu_max.
    """
    if bath.mu_av == 0.0:
        return 0.0 if size is None else np.zeros(size)
    theta = math.atan(bath.mu_max / bath.mu_av)
    u = rng.random(size)
    return bath.mu_av * np.tan((2.0 * u - 1.0) * theta)


def _validate_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or grid[0] != 0.0:
        raise PreconditionError("time grid must be 1-D and start at 0")
    if np.any(np.diff(grid) <= 0.0):
        raise PreconditionError("time grid must be strictly increasing")
    return grid


def telegraph_realization(
    bath: ThermalBathParams, grid, rng: np.random.Generator
) -> ShiftTrajectory:
    """Simulate one realization of the microscopic telegraph bath.

    ``n_fluctuators`` symmetric two-state fluctuators with couplings from the
    1/b^2 density flip independently at rate ``kappa/2`` (event-driven
    exponential waiting times, so grid resolution never aliases the process).
    The static shift is x = sum_i s_i(0)*b_i (its ensemble median, zero, is
    the offset convention) and y(t) = sum_i [s_i(t) - s_i(0)]*b_i, so
    y(0) = 0 exactly.  The returned trajectory's time axis is the requested
    grid merged with the flip times.
    """
    grid = _validate_grid(grid)
    if bath.mu_av == 0.0:
        return ShiftTrajectory(grid.copy(), 0.0, np.zeros_like(grid))
    lam_tot = bath.n_fluctuators * bath.flip_rate
    if grid.size > 1 and lam_tot * np.max(np.diff(grid)) > _MAX_FLIPS_PER_STEP:
        raise NumericError(
            "expected telegraph flips per grid step exceed "
            f"{_MAX_FLIPS_PER_STEP:g}; refine the grid or reduce kappa"
        )
    n = bath.n_fluctuators
    b = bath.b_min / (1.0 - rng.random(n) * (1.0 - bath.b_min / bath.mu_max))
    s = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    x = float(np.sum(s * b))

    flip_times = [0.0]
    flip_values = [0.0]
    y = 0.0
    t = 0.0
    t_max = grid[-1]
    while True:
        t += rng.exponential(1.0 / lam_tot)
        if t >= t_max:
            break
        j = int(rng.integers(n))
        y -= 2.0 * s[j] * b[j]
        s[j] = -s[j]
        flip_times.append(t)
        flip_values.append(y)

    ft = np.asarray(flip_times)
    fy = np.asarray(flip_values)
    all_times = np.union1d(grid, ft)
    idx = np.searchsorted(ft, all_times, side="right") - 1
    return ShiftTrajectory(all_times, x, fy[idx])


def telegraph_marginal_samples(
    bath: ThermalBathParams,
    t: float,
    n_samples: int,
    rng: np.random.Generator,
    chunk: int = 1 << 15,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact samples of (x, y(t)) from the telegraph bath, without trajectories.

    Each fluctuator flips a Poisson number of times in [0, t] and only the
    flip parity matters for its state at t, so the single-time marginal can be
    sampled directly: P(odd parity) = (1 - exp(-kappa*t))/2.  This is the same
    stochastic process as ``telegraph_realization``, evaluated at one time.
    """
    if t < 0.0:
        raise PreconditionError("t must be >= 0")
    xs = np.empty(n_samples)
    ys = np.empty(n_samples)
    if bath.mu_av == 0.0:
        xs.fill(0.0)
        ys.fill(0.0)
        return xs, ys
    p_odd = 0.5 * (1.0 - math.exp(-bath.kappa * t))
    n = bath.n_fluctuators
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        b = bath.b_min / (1.0 - rng.random((m, n)) * (1.0 - bath.b_min / bath.mu_max))
        sb = np.where(rng.random((m, n)) < 0.5, b, -b)
        flipped = rng.random((m, n)) < p_odd
        xs[done : done + m] = np.sum(sb, axis=1)
        ys[done : done + m] = -2.0 * np.sum(np.where(flipped, sb, 0.0), axis=1)
        done += m
    return xs, ys


def ka_step(y, dt: float, bath: ThermalBathParams, rng: np.random.Generator):
    """Advance the dynamic shift by one step of the fast analytic engine.

    Adds a Lorentzian increment of half-width m_rate*dt (valid only while the
    increment distribution is Lorentzian, dt << 1/(m_rate*rho)), then applies
    mean reversion exp(-kappa*dt).  Accumulated over many steps this gives y
    a Lorentzian marginal of half-width mu_av*(1 - exp(-kappa*t)), matching
    the telegraph engine; the joint statistics with x are approximate.
    """
    if not dt > 0.0:
        raise PreconditionError("dt must be positive")
    if bath.m_rate > 0.0 and dt > 0.1 / (bath.m_rate * bath.rho):
        raise PreconditionError(
            "dt exceeds the Lorentzian-increment validity window 0.1/(m_rate*rho)"
        )
    y = np.asarray(y, dtype=float)
    decay = math.exp(-bath.kappa * dt)
    if bath.m_rate == 0.0:
        out = y * decay
    else:
        width = bath.m_rate * dt
        step = width * np.tan(np.pi * (rng.random(y.shape) - 0.5))
        out = (y + step) * decay
    return float(out) if out.ndim == 0 else out


class TelegraphEngine:
    """Realization factory wrapping the event-driven telegraph bath."""

    def __init__(self, bath: ThermalBathParams):
        self.bath = bath

    def realize(self, grid, rng: np.random.Generator) -> ShiftTrajectory:
        return telegraph_realization(self.bath, grid, rng)


class KaEngine:
    """Realization factory stepping y with Lorentzian increments and mean reversion.

    The static shift is drawn from the truncated-Lorentzian stationary
    density; y advances by ``ka_step`` on sub-steps of at most ``dt``.
    """

    def __init__(self, bath: ThermalBathParams, dt: float | None = None):
        if dt is None:
            dt = 0.02 / bath.kappa
            if bath.m_rate > 0.0:
                dt = min(dt, 0.1 / (bath.m_rate * bath.rho))
        if not dt > 0.0:
            raise ConfigError("dt must be positive")
        if bath.m_rate > 0.0 and dt > 0.1 / (bath.m_rate * bath.rho):
            raise ConfigError(
                "dt exceeds the Lorentzian-increment validity window 0.1/(m_rate*rho)"
            )
        self.bath = bath
        self.dt = dt

    def realize(self, grid, rng: np.random.Generator) -> ShiftTrajectory:
        grid = _validate_grid(grid)
        bath = self.bath
        x = float(sample_static_shift(bath, rng))
        times = [0.0]
        values = [0.0]
        y = 0.0
        for k in range(1, grid.size):
            span = grid[k] - grid[k - 1]
            nsub = max(1, int(math.ceil(span / self.dt)))
            h = span / nsub
            for i in range(nsub):
                y = ka_step(y, h, bath, rng)
                times.append(grid[k - 1] + (i + 1) * h)
                values.append(y)
            # land exactly on the grid point regardless of rounding
            times[-1] = grid[k]
        return ShiftTrajectory(np.asarray(times), x, np.asarray(values))


def _half_exin(s: float) -> float:
    """0.5 * integral_0^s (1 - exp(-u))/u du, stable for small s."""
    if s <= 0.0:
        return 0.0
    if s < 1e-3:
        return 0.5 * s * (1.0 - s / 4.0 + s * s / 18.0 - s**3 / 96.0)
    return 0.5 * (math.log(s) + _EULER_GAMMA + special.exp1(s))


def _rate_shape(y: float) -> float:
    """y^3*coth(y)*sech(y)^2 in overflow-safe form 4*y^3*exp(-2y)/(1-exp(-4y))."""
    if y < 1e-8:
        return y * y
    return 4.0 * y**3 * math.exp(-2.0 * y) / -math.expm1(-4.0 * y)


@lru_cache(maxsize=1)
def _rate_shape_norm() -> float:
    """Normalization integral of y^3*coth(y)*sech(y)^2 over (0, inf)."""
    val, err = integrate.quad(_rate_shape, 0.0, np.inf, limit=200)
    if not np.isfinite(val) or err > 1e-9 * val:
        raise NumericError("width normalization integral did not converge")
    return val


def width_function(t: float, wp: WidthParams) -> float:
    """Half-width W(t) of the dynamic-shift propagator.

    Thermal fluctuators of scaled energy y (thermal weight sech(y)^2) relax at
    rate ~ y^3*coth(y)/t1_min; integrating their switching statistics over the
    inverse-square coupling density gives

        W(t) = (2*mu_av/I0) * int_0^inf sech(y)^2 * F(t*y^3*coth(y)/t1_min) dy

    with F(s) = 0.5*int_0^s (1-exp(-u))/u du and I0 the normalization making
    the small-t slope exactly mu_av/t1_min.  W grows linearly for
    t << t1_min and logarithmically for t >> t1_min.
    """
    if t < 0.0:
        raise PreconditionError("t must be >= 0")
    if t == 0.0 or wp.mu_av == 0.0:
        return 0.0
    i0 = _rate_shape_norm()
    scale = t / wp.t1_min

    def integrand(y: float) -> float:
        if y < 1e-8:
            return _half_exin(scale * y * y)
        rate = y**3 / math.tanh(y)
        e = math.exp(-2.0 * y)
        sech2 = 4.0 * e / (1.0 + e) ** 2
        return _half_exin(scale * rate) * sech2

    val, err = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-9, limit=300)
    if not np.isfinite(val) or err > 1e-6 * max(val, 1e-300):
        raise NumericError("width quadrature did not converge")
    return 2.0 * wp.mu_av * val / i0


def propagator_density(y, t: float, bath: ThermalBathParams):
    """Short-time propagator of the dynamic shift: Lorentzian of width m_rate*t.

    Valid only in the linear-width regime t << 1/kappa; used as a test
    oracle, not in the hot path.
    """
    if not t > 0.0:
        raise PreconditionError("t must be positive")
    if t > 0.1 / bath.kappa:
        raise PreconditionError("short-time propagator is valid only for t <= 0.1/kappa")
    w = bath.m_rate * t
    y = np.asarray(y, dtype=float)
    out = w / (np.pi * (w * w + y * y))
    return float(out) if out.ndim == 0 else out


def stationary_density(x, bath: ThermalBathParams):
    """Stationary density of the total shift, by numeric Fourier inversion.

    Evaluates (1/pi) * int_0^inf cos(x*tau) * exp(-mu_av*(sqrt(tau^2+rho^2)-rho)) dtau.
    This is the reference against which both the truncated-Lorentzian sampler
    and the telegraph engine are tested: a Lorentzian of half-width mu_av in
    the core, decaying faster than a Lorentzian beyond mu_max.
    """
    if not bath.mu_av > 0.0:
        raise PreconditionError("stationary density requires mu_av > 0")
    mu, rho = bath.mu_av, bath.rho
    upper = 60.0 / mu

    def envelope(tau: float) -> float:
        return math.exp(-mu * (math.hypot(tau, rho) - rho))

    def one(xv: float) -> float:
        val, err = integrate.quad(
            envelope, 0.0, upper, weight="cos", wvar=float(xv), limit=400
        )
        if not np.isfinite(val):
            raise NumericError("stationary density quadrature failed")
        return val / math.pi

    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return one(float(x))
    return np.array([one(v) for v in x])
