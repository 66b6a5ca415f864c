"""Closed-form dephasing laws, correlators, and regime diagnostics.

Everything here is analytic: these functions are the predictions the Monte
Carlo harness is checked against, plus the coarse diagnostics (crossover
time, regime classification, dephasing-rate estimates) used to interpret a
device before running any simulation.  All frequencies and rates are angular
(rad/s); times are seconds.
"""
from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .dynamics import bessel_weights, s4_factor
from .ensemble import EnsembleSpec, QubitParams, TlsParams
from .errors import ConfigError, NumericError, PreconditionError


@dataclass(frozen=True)
class LawParams:
    """Device-level parameters entering the aggregate dephasing law.

    ``g_max`` is the maximal qubit-TLS coupling, ``delta_typ`` the typical
    TLS level spacing near resonance, ``gamma`` the TLS linewidth, ``mu_av``
    and ``mu_max`` the typical and maximal spectral-diffusion spans, and
    ``t1_thermal`` the relaxation time of the thermal fluctuators.
    """

    g_max: float
    delta_typ: float
    gamma: float
    mu_av: float
    mu_max: float
    t1_thermal: float

    def __post_init__(self) -> None:
        for name in ("g_max", "delta_typ", "gamma", "mu_av", "mu_max", "t1_thermal"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be positive")
        if self.mu_max < self.mu_av:
            raise ConfigError("mu_max must be >= mu_av")

    @classmethod
    def from_ensemble_spec(cls, spec: EnsembleSpec) -> "LawParams":
        return cls(
            g_max=spec.g_max,
            delta_typ=spec.delta_typ,
            gamma=spec.gamma,
            mu_av=spec.mu_av,
            mu_max=spec.mu_max,
            t1_thermal=spec.t1_thermal,
        )

    @property
    def gamma_1q(self) -> float:
        """Golden-rule relaxation rate of the qubit into the TLS bath."""
        return self.g_max**2 / self.delta_typ

    @property
    def alpha(self) -> float:
        """Spectral-diffusion acceleration: propagator width grows as alpha*t."""
        return self.mu_av / self.t1_thermal

    @property
    def t_crossover(self) -> float:
        """Time where the diffusion width reaches the TLS linewidth gamma."""
        return (self.gamma / self.mu_av) * self.t1_thermal


@dataclass(frozen=True)
class RegimeReport:
    """Summary diagnostics of a device's dephasing regime."""

    t_crossover: float
    neg2lnd_at_crossover: float
    markov_number: float
    markov_ok: bool
    classification: str
    gamma_1q: float
    gamma_phi: float


@dataclass(frozen=True)
class TemperatureCalibration:
    """Temperature scalings of the thermal bath.

    mu_av = c_mu * T (diffusion span linear in temperature) and the
    fluctuator relaxation rate 1/t1_thermal = c_r * T^3.
    """

    c_mu: float
    c_r: float

    def __post_init__(self) -> None:
        if not self.c_mu > 0.0 or not self.c_r > 0.0:
            raise ConfigError("calibration constants must be positive")


BathScales = namedtuple("BathScales", ["mu_av", "t1_thermal"])


@dataclass(frozen=True)
class SweepResult:
    """Dephasing-rate estimates across a temperature grid."""

    temps: np.ndarray
    mu_av: np.ndarray
    t1_thermal: np.ndarray
    gamma_phi: np.ndarray
    gamma_phi_long: np.ndarray


def _h_stable(x):
    """(1+x)*log1p(x) - x, with a series branch to avoid cancellation."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1e-6
    xs = x[small]
    out[small] = 0.5 * xs * xs * (1.0 - xs / 3.0 + xs * xs / 6.0)
    xl = x[~small]
    out[~small] = (1.0 + xl) * np.log1p(xl) - xl
    return out


def dephasing_bracket(t, alpha: float, gamma: float):
    """Time integral B(t) = int_0^t (t - tau)/(gamma + alpha*tau) dtau.

    Equals (gamma/alpha^2) * [(1+x)ln(1+x) - x] at x = alpha*t/gamma; grows
    as t^2/(2*gamma) for alpha*t << gamma and as (t/alpha)*ln(alpha*t/gamma)
    beyond.  This bracket carries the entire time dependence of the
    short-time dephasing cumulant.
    """
    if not alpha > 0.0 or not gamma > 0.0:
        raise PreconditionError("alpha and gamma must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise PreconditionError("t must be >= 0")
    out = (gamma / alpha**2) * _h_stable(alpha * t / gamma)
    return float(out) if out.ndim == 0 else out


def dephasing_law_curve(params: LawParams, x_mod: float, ts):
    """Aggregate dephasing exponent -2*ln D(t) and the regime branch per point.

    Valid in the strong-diffusion regime mu_av > gamma.  For t <= t1_thermal
    the exponent is (g_max^4/delta_typ) * S4(x_mod) * 2*B(t) with the exact
    bracket B; beyond t1_thermal the diffusion width has saturated at mu_av
    and the exponent continues linearly with slope
    (g_max^4/delta_typ) * S4 * (t1_thermal/mu_av) * ln(mu_av/gamma).

    Returns (values, branches) with branch ids 1 (quadratic, t <= crossover),
    2 (dynamical, crossover < t <= t1_thermal), 3 (saturated, t > t1_thermal).
    """
    if not params.mu_av > params.gamma:
        raise PreconditionError("the aggregate law requires strong diffusion mu_av > gamma")
    if x_mod < 0.0:
        raise PreconditionError("x_mod must be >= 0")
    ts = np.asarray(ts, dtype=float)
    scalar = ts.ndim == 0
    ts = np.atleast_1d(ts)
    if np.any(ts < 0.0):
        raise PreconditionError("times must be >= 0")

    s4 = s4_factor(x_mod)
    pref = params.g_max**4 / params.delta_typ
    t1 = params.t1_thermal
    alpha = params.alpha
    u = params.mu_av / params.gamma

    early = pref * s4 * 2.0 * dephasing_bracket(np.minimum(ts, t1), alpha, params.gamma)
    v_t1 = pref * s4 * 2.0 * dephasing_bracket(t1, alpha, params.gamma)
    slope = pref * s4 * (t1 / params.mu_av) * math.log(u)
    late = v_t1 + slope * (ts - t1)
    values = np.where(ts <= t1, early, late)

    branches = np.where(
        ts <= params.t_crossover, 1, np.where(ts <= t1, 2, 3)
    ).astype(np.int64)
    if scalar:
        return float(values[0]), int(branches[0])
    return values, branches


def dephasing_law(params: LawParams, x_mod: float, t):
    """Aggregate dephasing exponent -2*ln D(t) (see dephasing_law_curve)."""
    values, _ = dephasing_law_curve(params, x_mod, t)
    return values


def small_diffusion_law(params: LawParams, x_mod: float, t):
    """Dephasing exponent when diffusion never exceeds the TLS linewidth.

    -2*ln D(t) = (gamma_1q*t)^2 * (mu_max/gamma)^2 * (delta_typ/gamma) * S4.
    Requires mu_max < gamma and delta_typ < gamma.
    """
    if not params.mu_max < params.gamma:
        raise PreconditionError("small-diffusion law requires mu_max < gamma")
    if not params.delta_typ < params.gamma:
        raise PreconditionError("small-diffusion law requires delta_typ < gamma")
    if x_mod < 0.0:
        raise PreconditionError("x_mod must be >= 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise PreconditionError("times must be >= 0")
    out = (
        (params.gamma_1q * t) ** 2
        * (params.mu_max / params.gamma) ** 2
        * (params.delta_typ / params.gamma)
        * s4_factor(x_mod)
    )
    return float(out) if out.ndim == 0 else out


def _threshold_time(params: LawParams, x_mod: float) -> float:
    """Time where the aggregate law crosses 1 (definition of 1/gamma_phi)."""

    def f(t: float) -> float:
        return dephasing_law(params, x_mod, t) - 1.0

    t_hi = params.t_crossover
    for _ in range(400):
        if f(t_hi) >= 0.0:
            break
        t_hi *= 4.0
    else:
        raise NumericError("could not bracket the dephasing threshold from above")
    t_lo = t_hi
    for _ in range(400):
        t_lo /= 4.0
        if f(t_lo) <= 0.0:
            break
    else:
        raise NumericError("could not bracket the dephasing threshold from below")
    return brentq(f, t_lo, t_hi, rtol=4.0 * np.finfo(float).eps)


def crossover_diagnostics(params: LawParams, x_mod: float = 0.0) -> RegimeReport:
    """Classify a device and estimate its pure-dephasing rate.

    ``markov_number`` = t1_thermal * gamma^2 / mu_av measures how many TLS
    lifetimes fit into the time the diffusion needs to cross the linewidth;
    the Markov treatment of individual TLSs needs it to exceed 1.
    ``neg2lnd_at_crossover`` is the order-of-magnitude dephasing exponent
    accumulated by the crossover time (constant set to 1).
    """
    s4 = s4_factor(x_mod)
    g1q = params.gamma_1q
    t1 = params.t1_thermal
    neg2 = (
        (g1q * t1) ** 2
        * s4
        * params.gamma
        * params.delta_typ
        / params.mu_av**2
    )
    markov_number = t1 * params.gamma**2 / params.mu_av
    if params.mu_max < params.gamma:
        classification = "small-diffusion"
        gamma_phi = (
            g1q
            * (params.mu_max / params.gamma)
            * math.sqrt((params.delta_typ / params.gamma) * s4)
        )
    else:
        classification = (
            "quasi-static-dominant" if neg2 > 1.0 else "dynamical-subdominant"
        )
        if params.mu_av > params.gamma:
            gamma_phi = 1.0 / _threshold_time(params, x_mod)
        else:
            gamma_phi = math.nan
    return RegimeReport(
        t_crossover=params.t_crossover,
        neg2lnd_at_crossover=neg2,
        markov_number=markov_number,
        markov_ok=bool(markov_number > 1.0),
        classification=classification,
        gamma_1q=g1q,
        gamma_phi=gamma_phi,
    )


def _resonance_weights(tls: TlsParams, qubit: QubitParams) -> float:
    """sum_m J_m^4 / (mu_av^2 + (detuning + m*Omega)^2) for one TLS."""
    ms, jm2 = bessel_weights(qubit.mod_ratio)
    dm = (qubit.e0 - tls.eps0) + ms * qubit.omega_mod
    return float(np.sum(jm2 * jm2 / (tls.mu_av**2 + dm * dm)))


def mean_c(tls: TlsParams, qubit: QubitParams, regime: str = "short") -> complex:
    """Shift-averaged Markov coefficient <C> of one TLS.

    Averaging 1/(gamma - i*(detuning - shift)) over a Lorentzian shift of
    half-width w adds w to the linewidth.  In the short regime only the
    quasi-static shift has acted and the diffusion span dominates the
    linewidth (requires mu_av >= gamma):

        <C> = (g^2/4) sum_m J_m^2 / (mu_av - i*(detuning + m*Omega))

    In the long regime the dynamic shift has fully relaxed as well:

        <C> = (g^2/4) sum_m J_m^2 / (gamma + mu_av - i*(detuning + m*Omega)).
    """
    ms, jm2 = bessel_weights(qubit.mod_ratio)
    dm = (qubit.e0 - tls.eps0) + ms * qubit.omega_mod
    if regime == "short":
        if tls.mu_av < tls.gamma:
            raise PreconditionError(
                "short-regime mean coefficient requires strong diffusion mu_av >= gamma"
            )
        width = tls.mu_av
    elif regime == "long":
        width = tls.gamma + tls.mu_av
    else:
        raise ConfigError("regime must be 'short' or 'long'")
    return complex(0.25 * tls.g**2 * np.sum(jm2 / (width - 1j * dm)))


def correlator_closed(
    tls: TlsParams, qubit: QubitParams, tau: float, r_thermal: float, regime: str = "short"
):
    """Closed-form coefficient correlator of one TLS at time separation tau.

    In the short regime (strong diffusion, |tau| within the linear-width
    window) the fluctuation correlator is real:

        <dC dC*>(tau) = (g^4 mu_av / 8) / (2*gamma + W(tau))
                         * sum_m J_m^4 / (mu_av^2 + (detuning + m*Omega)^2)

    with W(tau) = mu_av * r_thermal * |tau|.  In the long regime the
    correlator of C itself factorizes with the dynamic width saturating at
    mu_av, so for |tau| >= 1/r_thermal it equals |<C>_long|^2 exactly.
    """
    if not r_thermal > 0.0:
        raise PreconditionError("r_thermal must be positive")
    tau = abs(float(tau))
    if regime == "short":
        if tls.mu_av < tls.gamma:
            raise PreconditionError(
                "short-regime correlator requires strong diffusion mu_av >= gamma"
            )
        w = tls.mu_av * r_thermal * tau
        return (
            0.125
            * tls.g**4
            * tls.mu_av
            / (2.0 * tls.gamma + w)
            * _resonance_weights(tls, qubit)
        )
    if regime == "long":
        ms, jm2 = bessel_weights(qubit.mod_ratio)
        dm = (qubit.e0 - tls.eps0) + ms * qubit.omega_mod
        w_sat = tls.mu_av * min(r_thermal * tau, 1.0)
        left = np.sum(jm2 / (tls.gamma + tls.mu_av + 1j * dm))
        right = np.sum(jm2 / (tls.gamma + w_sat - 1j * dm))
        return complex(0.0625 * tls.g**4 * left * right)
    raise ConfigError("regime must be 'short' or 'long'")


def cumulant_exact_shorttime(
    tls: TlsParams, qubit: QubitParams, t, r_thermal: float
):
    """Second dephasing cumulant of one TLS while the diffusion width grows.

    K(t) = (g^4 mu_av / 4) * B(t) * sum_m J_m^4/(mu_av^2 + (detuning+m*Omega)^2)
    with the bracket B evaluated at alpha = mu_av*r_thermal.  Valid while the
    width grows linearly, t <= 1/r_thermal; K(0) = 0 and K is increasing.
    """
    if not r_thermal > 0.0:
        raise PreconditionError("r_thermal must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise PreconditionError("t must be >= 0")
    if np.any(t > 1.0 / r_thermal):
        raise PreconditionError(
            "short-time cumulant is valid only for t <= 1/r_thermal"
        )
    if tls.mu_av == 0.0:
        out = np.zeros_like(t)
        return float(out) if out.ndim == 0 else out
    alpha = tls.mu_av * r_thermal
    out = (
        0.25
        * tls.g**4
        * tls.mu_av
        * dephasing_bracket(t, alpha, tls.gamma)
        * _resonance_weights(tls, qubit)
    )
    return float(out) if np.ndim(out) == 0 else out


def cumulant_shorttime_asymptote(
    tls: TlsParams, qubit: QubitParams, t, r_thermal: float, regime: str
):
    """Asymptotic forms of the short-time cumulant.

    'quadratic' (alpha*t << gamma):   (g^4 mu_av / (8 gamma)) * t^2 * sum_m ...
    'dynamical' (alpha*t >> gamma):   (g^4 / (4 r_thermal)) * t *
                                      (ln(alpha*t/gamma) - 1) * sum_m ...
    """
    if not r_thermal > 0.0:
        raise PreconditionError("r_thermal must be positive")
    t = np.asarray(t, dtype=float)
    weights = _resonance_weights(tls, qubit)
    alpha = tls.mu_av * r_thermal
    if regime == "quadratic":
        out = 0.125 * tls.g**4 * tls.mu_av / tls.gamma * t * t * weights
    elif regime == "dynamical":
        x = alpha * t / tls.gamma
        if np.any(x <= 1.0):
            raise PreconditionError(
                "dynamical asymptote requires alpha*t > gamma"
            )
        out = 0.25 * tls.g**4 / r_thermal * t * (np.log(x) - 1.0) * weights
    else:
        raise ConfigError("regime must be 'quadratic' or 'dynamical'")
    return float(out) if np.ndim(out) == 0 else out


def relaxation_cumulant(
    ensemble, qubit: QubitParams, t: float, r_thermal: float, regime: str = "short"
) -> float:
    """Cumulant estimate of ln R(t), R = sqrt(<|a|^2>), for an ensemble of TLSs.

    Sums -Re<C>*t per TLS plus, in the short regime, the variance of the
    accumulated real phase: ln<|a|^2> = -2*Re<C>*t + 2*Var(Re Phi), and the
    real part carries half of the total coefficient variance

        Var(Re Phi) = (g^4 mu_av / 8) * B(t; alpha, 2*gamma) * sum_m ...

    so the rms amplitude decays slower than the mean.  The long regime keeps
    only the motionally averaged mean decay, appropriate once the coefficient
    fluctuations have decorrelated.
    """
    total = 0.0
    for tls in ensemble:
        total -= mean_c(tls, qubit, regime=regime).real * t
        if regime == "short" and tls.mu_av > 0.0:
            if not r_thermal > 0.0:
                raise PreconditionError("r_thermal must be positive")
            if t > 1.0 / r_thermal:
                raise PreconditionError(
                    "short-regime relaxation cumulant is valid only for "
                    "t <= 1/r_thermal"
                )
            alpha = tls.mu_av * r_thermal
            total += (
                0.125
                * tls.g**4
                * tls.mu_av
                * dephasing_bracket(t, alpha, 2.0 * tls.gamma)
                * _resonance_weights(tls, qubit)
            )
    return total


def resonance_sum_estimate(params: LawParams) -> float:
    """Device-level scale of the resonance sum, g_max^4/(delta_typ*mu_av)."""
    return params.g_max**4 / (params.delta_typ * params.mu_av)


def resonance_sum_ensemble(ensemble, qubit: QubitParams) -> float:
    """Ensemble resonance sum sum_n g_n^4 sum_m J_m^4/(mu_n^2 + (Delta_n + m*Omega)^2).

    This is the quantity the quadratic-regime dephasing exponent is
    proportional to; its ensemble average over detunings reproduces the
    device estimate times the modulation factor S4.
    """
    if any(tls.mu_av <= 0.0 for tls in ensemble):
        raise PreconditionError("resonance sum requires mu_av > 0 for every TLS")
    return float(
        sum(tls.g**4 * _resonance_weights(tls, qubit) for tls in ensemble)
    )


def temperature_map(cal: TemperatureCalibration, temps) -> BathScales:
    """Bath scales at temperature(s) T: mu_av = c_mu*T, 1/t1_thermal = c_r*T^3."""
    temps = np.asarray(temps, dtype=float)
    if np.any(temps <= 0.0):
        raise PreconditionError("temperatures must be positive")
    mu = cal.c_mu * temps
    t1 = 1.0 / (cal.c_r * temps**3)
    if temps.ndim == 0:
        return BathScales(float(mu), float(t1))
    return BathScales(mu, t1)


def temperature_sweep(
    base: LawParams, cal: TemperatureCalibration, temps, x_mod: float = 0.0
) -> SweepResult:
    """Dephasing-rate estimates over a temperature grid.

    At each temperature the diffusion span and fluctuator lifetime follow the
    calibration (with mu_max tied to mu_av: the sweep tracks the typical
    environment).  Below the crossover temperature (mu_av <= gamma) the
    small-diffusion rate applies; above it gamma_phi is the inverse time at
    which the aggregate law reaches 1.  ``gamma_phi_long`` is half the
    saturated late-time slope of the law, i.e. the asymptotic exponential
    decay rate of D (defined only above the crossover).
    """
    temps = np.atleast_1d(np.asarray(temps, dtype=float))
    if np.any(temps <= 0.0):
        raise PreconditionError("temperatures must be positive")
    s4 = s4_factor(x_mod)
    g1q = base.gamma_1q
    mu_arr = np.empty(temps.size)
    t1_arr = np.empty(temps.size)
    gp = np.empty(temps.size)
    gp_long = np.empty(temps.size)
    for i, temp in enumerate(temps):
        mu, t1 = temperature_map(cal, float(temp))
        mu_arr[i] = mu
        t1_arr[i] = t1
        u = mu / base.gamma
        if u <= 1.0:
            gp[i] = g1q * u * math.sqrt((base.delta_typ / base.gamma) * s4)
            gp_long[i] = math.nan
        else:
            p = LawParams(
                g_max=base.g_max,
                delta_typ=base.delta_typ,
                gamma=base.gamma,
                mu_av=mu,
                mu_max=mu,
                t1_thermal=t1,
            )
            gp[i] = 1.0 / _threshold_time(p, x_mod)
            pref = base.g_max**4 / base.delta_typ
            gp_long[i] = 0.5 * pref * s4 * (t1 / mu) * math.log(u)
    return SweepResult(temps, mu_arr, t1_arr, gp, gp_long)
