import math

import numpy as np
import pytest
from scipy import stats

from dephasim import (
    ConfigError,
    EnsembleSpec,
    QubitParams,
    TlsParams,
    build_ensemble,
    check_band,
    golden_rule_rate,
    mean_tls_count,
    sample_coupling,
)
from dephasim.ensemble import count_integral

TAU = math.tau


def _spec(**kw):
    base = dict(
        delta_typ=TAU * 0.8e6,
        g_max=TAU * 0.08e6,
        band_halfwidth=TAU * 25e6,
        gamma=TAU * 0.5e6,
        mu_av=TAU * 5e6,
        mu_max=TAU * 25e6,
        r_thermal=1e3,
    )
    base.update(kw)
    return EnsembleSpec(**base)


class TestParamValidation:
    def test_qubit_requires_positive_splitting(self):
        with pytest.raises(ConfigError):
            QubitParams(e0=0.0)

    def test_modulation_needs_positive_frequency(self):
        with pytest.raises(ConfigError):
            QubitParams(e0=1.0, a_mod=1.0, omega_mod=0.0)

    def test_mod_ratio(self):
        q = QubitParams(e0=TAU * 5e9, a_mod=TAU * 100e6, omega_mod=TAU * 10e6)
        assert q.mod_ratio == pytest.approx(10.0, rel=1e-15)
        assert QubitParams(e0=1.0).mod_ratio == 0.0

    def test_g_min_defaults_to_thousandth_of_g_max(self):
        spec = _spec()
        assert spec.g_min == pytest.approx(1e-3 * spec.g_max, rel=1e-15)

    def test_coupling_bounds_ordering(self):
        with pytest.raises(ConfigError):
            _spec(g_min=TAU * 0.09e6)  # g_min above g_max

    def test_strong_coupling_rejected(self):
        with pytest.raises(ConfigError):
            _spec(g_max=TAU * 0.6e6)  # exceeds gamma

    def test_negative_mu_av_rejected(self):
        with pytest.raises(ConfigError):
            _spec(mu_av=-1.0)

    def test_zero_mu_av_allowed(self):
        spec = _spec(mu_av=0.0)
        assert spec.mu_av == 0.0

    def test_mu_ordering(self):
        with pytest.raises(ConfigError):
            _spec(mu_max=TAU * 1e6)  # below mu_av

    def test_t1_thermal_inverse(self):
        assert _spec(r_thermal=5e4).t1_thermal == pytest.approx(20e-6, rel=1e-15)

    def test_tls_detuning(self):
        tls = TlsParams(eps0=TAU * 4.99e9, g=1e5, gamma=TAU * 0.5e6,
                        mu_av=0.0, mu_max=0.0)
        assert tls.detuning(TAU * 5e9) == pytest.approx(TAU * 0.01e9, rel=1e-12)

    def test_band_narrower_than_diffusion_span_rejected(self):
        with pytest.raises(ConfigError):
            check_band(_spec(band_halfwidth=TAU * 10e6))


class TestCountIntegral:
    def test_matches_antiderivative(self):
        # integral of sqrt(1-x^2)/x from a to 1 has the closed form
        # ln((1+sqrt(1-a^2))/a) - sqrt(1-a^2)
        for a in (1e-3, 1e-2, 0.3):
            spec = _spec(g_min=a * TAU * 0.08e6)
            root = math.sqrt(1.0 - a * a)
            exact = math.log((1.0 + root) / a) - root
            assert count_integral(spec) == pytest.approx(exact, rel=1e-9)

    def test_mean_count_scales_with_band_and_spacing(self):
        spec = _spec()
        assert mean_tls_count(spec) == pytest.approx(
            2.0 * spec.band_halfwidth / spec.delta_typ * count_integral(spec),
            rel=1e-12,
        )

    def test_golden_rule_rate(self):
        spec = _spec()
        assert golden_rule_rate(spec) == pytest.approx(
            spec.g_max**2 / spec.delta_typ, rel=1e-15
        )


def _coupling_cdf(spec, gs):
    """Numeric CDF of the coupling density on a fine log grid."""
    grid = np.geomspace(spec.g_min, spec.g_max, 4001)
    w = np.sqrt(np.clip(1.0 - (grid / spec.g_max) ** 2, 0.0, None)) / grid
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    return np.interp(gs, grid, cdf)


class TestSampling:
    def test_coupling_distribution(self):
        spec = _spec()
        rng = np.random.default_rng(3)
        gs = np.array([sample_coupling(spec, rng) for _ in range(5000)])
        assert gs.min() >= spec.g_min and gs.max() <= spec.g_max
        ks = stats.kstest(gs, lambda v: _coupling_cdf(spec, v)).statistic
        assert ks < 0.03

    def test_batch_sampler_matches_scalar(self):
        spec = _spec(delta_typ=TAU * 0.02e6)  # large mean count
        qubit = QubitParams(e0=TAU * 5e9)
        rng = np.random.default_rng(9)
        batch = np.array([tls.g for tls in build_ensemble(spec, qubit, rng)])
        scalar = np.array([sample_coupling(spec, rng) for _ in range(4000)])
        res = stats.ks_2samp(batch, scalar)
        assert res.pvalue > 1e-3

    def test_counts_are_poisson(self):
        spec = _spec(band_halfwidth=TAU * 25e6, delta_typ=TAU * 13e6)
        qubit = QubitParams(e0=TAU * 5e9)
        lam = mean_tls_count(spec)
        assert 10 < lam < 50
        rng = np.random.default_rng(12)
        counts = np.array(
            [len(build_ensemble(spec, qubit, rng)) for _ in range(400)]
        )
        assert counts.mean() == pytest.approx(lam, rel=0.05)
        assert 0.8 < counts.var(ddof=1) / counts.mean() < 1.2

    def test_splittings_uniform_in_band(self):
        spec = _spec(delta_typ=TAU * 0.05e6)
        qubit = QubitParams(e0=TAU * 5e9)
        rng = np.random.default_rng(7)
        eps0 = np.array([tls.eps0 for tls in build_ensemble(spec, qubit, rng)])
        lo = qubit.e0 - spec.band_halfwidth
        ks = stats.kstest(
            (eps0 - lo) / (2.0 * spec.band_halfwidth), stats.uniform.cdf
        ).statistic
        assert ks < 0.03

    def test_ensemble_copies_typical_values(self):
        spec = _spec()
        qubit = QubitParams(e0=TAU * 5e9)
        ens = build_ensemble(spec, qubit, np.random.default_rng(1))
        assert len(ens) > 0
        assert all(t.gamma == spec.gamma for t in ens)
        assert all(t.mu_av == spec.mu_av for t in ens)
        assert all(t.mu_max == spec.mu_max for t in ens)
