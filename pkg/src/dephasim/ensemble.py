"""Qubit and TLS parameter types and ensemble sampling.

All energies and frequencies are angular (rad/s) with hbar = 1; times are in
seconds.  Conversion from human-facing units (MHz, us) happens only at the
CLI boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ConfigError, NumericError

# The log-uniform proposal is accepted with probability ~0.95 over the default
# coupling range, so hitting this cap signals a broken configuration rather
# than bad luck.
_REJECTION_CAP = 10_000


@dataclass(frozen=True)
class QubitParams:
    """Qubit level splitting with an optional harmonic modulation drive.

    The instantaneous splitting is ``e0 + a_mod*cos(omega_mod*t)``; the
    accumulated drive phase is ``(a_mod/omega_mod)*sin(omega_mod*t)``.
    """

    e0: float
    a_mod: float = 0.0
    omega_mod: float = 0.0

    def __post_init__(self) -> None:
        if not self.e0 > 0.0:
            raise ConfigError("qubit splitting e0 must be positive")
        if self.a_mod < 0.0:
            raise ConfigError("modulation amplitude a_mod must be >= 0")
        if self.a_mod > 0.0 and not self.omega_mod > 0.0:
            raise ConfigError("omega_mod must be positive when a_mod > 0")

    @property
    def mod_ratio(self) -> float:
        """Dimensionless drive strength a_mod/omega_mod (0 when undriven)."""
        if self.a_mod == 0.0:
            return 0.0
        return self.a_mod / self.omega_mod


@dataclass(frozen=True)
class EnsembleSpec:
    """Statistical description of the TLS environment of one device.

    ``delta_typ`` is the typical level-spacing constant of the TLS density of
    states, ``g_max``/``g_min`` bound the qubit-TLS couplings,
    ``band_halfwidth`` is the half-width of the spectral band around the qubit
    splitting in which TLSs are generated, and ``r_thermal`` is the switching
    rate of the thermal fluctuators driving spectral diffusion.
    """

    delta_typ: float
    g_max: float
    band_halfwidth: float
    gamma: float
    mu_av: float
    mu_max: float
    r_thermal: float
    g_min: float | None = None

    def __post_init__(self) -> None:
        if self.g_min is None:
            object.__setattr__(self, "g_min", 1e-3 * self.g_max)
        for name in ("delta_typ", "g_max", "band_halfwidth", "gamma", "r_thermal"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 < self.g_min < self.g_max:
            raise ConfigError("need 0 < g_min < g_max")
        if self.g_max > self.gamma:
            raise ConfigError("g_max must not exceed gamma (weak-coupling validity)")
        if self.mu_av < 0.0:
            raise ConfigError("mu_av must be >= 0")
        if self.mu_max < self.mu_av:
            raise ConfigError("mu_max must be >= mu_av")

    @property
    def t1_thermal(self) -> float:
        """Relaxation time of the thermal fluctuators, 1/r_thermal."""
        return 1.0 / self.r_thermal


@dataclass(frozen=True)
class TlsParams:
    """One quantum TLS: bare splitting, coupling, linewidth, diffusion spans."""

    eps0: float
    g: float
    gamma: float
    mu_av: float
    mu_max: float

    def __post_init__(self) -> None:
        if not self.eps0 > 0.0:
            raise ConfigError("bare splitting eps0 must be positive")
        if not self.g > 0.0:
            raise ConfigError("coupling g must be positive")
        if not self.gamma > 0.0:
            raise ConfigError("linewidth gamma must be positive")
        if self.mu_av < 0.0:
            raise ConfigError("mu_av must be >= 0")
        if self.mu_max < self.mu_av:
            raise ConfigError("mu_max must be >= mu_av")

    def detuning(self, e0: float) -> float:
        """Bare detuning of the qubit from this TLS, e0 - eps0."""
        return e0 - self.eps0


def check_band(spec: EnsembleSpec) -> None:
    """Reject bands narrower than the diffusion span of near-resonant TLSs."""
    if spec.band_halfwidth < spec.mu_max:
        raise ConfigError(
            "band_halfwidth must be >= mu_max so the band contains the full "
            "diffusion span of near-resonant TLSs"
        )


def count_integral(spec: EnsembleSpec) -> float:
    """Quadrature of the coupling weight sqrt(1-(g/g_max)^2)/g over [g_min, g_max]."""

    def weight(g: float) -> float:
        return math.sqrt(max(0.0, 1.0 - (g / spec.g_max) ** 2)) / g

    val, err = integrate.quad(weight, spec.g_min, spec.g_max, limit=200)
    if not np.isfinite(val) or err > 1e-8 * max(abs(val), 1.0):
        raise NumericError("coupling count integral did not converge")
    return val


def mean_tls_count(spec: EnsembleSpec) -> float:
    """Expected number of TLSs in the generation band."""
    return (2.0 * spec.band_halfwidth / spec.delta_typ) * count_integral(spec)


def sample_coupling(spec: EnsembleSpec, rng: np.random.Generator) -> float:
    """Draw one coupling from the density ~ sqrt(1-(g/g_max)^2)/g on [g_min, g_max].

    Rejection sampling with a log-uniform proposal; the square-root factor is
    the acceptance probability.
    """
    ln_ratio = math.log(spec.g_max / spec.g_min)
    for _ in range(_REJECTION_CAP):
        g = spec.g_min * math.exp(ln_ratio * rng.random())
        if rng.random() <= math.sqrt(max(0.0, 1.0 - (g / spec.g_max) ** 2)):
            return g
    raise NumericError("coupling rejection sampler exceeded its iteration cap")


def _sample_couplings(spec: EnsembleSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """Vectorized batch version of sample_coupling."""
    out = np.empty(n)
    filled = 0
    ln_ratio = math.log(spec.g_max / spec.g_min)
    for _ in range(_REJECTION_CAP):
        if filled >= n:
            return out
        m = max(64, int(1.25 * (n - filled)) + 1)
        g = spec.g_min * np.exp(ln_ratio * rng.random(m))
        accept = rng.random(m) <= np.sqrt(np.clip(1.0 - (g / spec.g_max) ** 2, 0.0, None))
        take = g[accept][: n - filled]
        out[filled : filled + take.size] = take
        filled += take.size
    raise NumericError("coupling rejection sampler exceeded its iteration cap")


def build_ensemble(
    spec: EnsembleSpec, qubit: QubitParams, rng: np.random.Generator
) -> list[TlsParams]:
    """Sample one TLS ensemble: Poisson count, uniform bare splittings, weighted couplings.

    The linewidth and diffusion spans are copied from ``spec`` (typical-value
    policy); per-TLS distributions are a possible extension point.
    """
    check_band(spec)
    n = int(rng.poisson(mean_tls_count(spec)))
    eps0 = rng.uniform(
        qubit.e0 - spec.band_halfwidth, qubit.e0 + spec.band_halfwidth, size=n
    )
    gs = _sample_couplings(spec, rng, n)
    return [
        TlsParams(
            eps0=float(e),
            g=float(g),
            gamma=spec.gamma,
            mu_av=spec.mu_av,
            mu_max=spec.mu_max,
        )
        for e, g in zip(eps0, gs)
    ]


def golden_rule_rate(spec: EnsembleSpec) -> float:
    """Golden-rule estimate of the qubit energy relaxation rate, g_max^2/delta_typ."""
    return spec.g_max**2 / spec.delta_typ
