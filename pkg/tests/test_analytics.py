import math

import numpy as np
import pytest
from scipy.integrate import quad

from dephasim import (
    ConfigError,
    EnsembleSpec,
    LawParams,
    NumericError,
    PreconditionError,
    QubitParams,
    TemperatureCalibration,
    TlsParams,
    correlator_closed,
    crossover_diagnostics,
    cumulant_exact_shorttime,
    cumulant_shorttime_asymptote,
    dephasing_bracket,
    dephasing_law,
    dephasing_law_curve,
    mean_c,
    relaxation_cumulant,
    resonance_sum_ensemble,
    resonance_sum_estimate,
    s4_factor,
    small_diffusion_law,
    temperature_map,
    temperature_sweep,
)

TAU = math.tau


def _law(**kw):
    base = dict(
        g_max=TAU * 0.08e6,
        delta_typ=TAU * 0.8e6,
        gamma=TAU * 0.5e6,
        mu_av=TAU * 5e6,
        mu_max=TAU * 25e6,
        t1_thermal=1e-3,
    )
    base.update(kw)
    return LawParams(**base)


class TestLawParams:
    def test_validation(self):
        with pytest.raises(ConfigError):
            _law(gamma=0.0)
        with pytest.raises(ConfigError):
            _law(mu_max=TAU * 1e6)

    def test_from_ensemble_spec(self):
        spec = EnsembleSpec(
            delta_typ=TAU * 0.8e6,
            g_max=TAU * 0.08e6,
            band_halfwidth=TAU * 165e6,
            gamma=TAU * 0.5e6,
            mu_av=TAU * 5e6,
            mu_max=TAU * 25e6,
            r_thermal=1e3,
        )
        params = LawParams.from_ensemble_spec(spec)
        assert params.g_max == spec.g_max
        assert params.t1_thermal == pytest.approx(1e-3, rel=1e-15)

    def test_derived_scales(self):
        p = _law()
        assert p.gamma_1q == pytest.approx(p.g_max**2 / p.delta_typ, rel=1e-15)
        assert p.alpha == pytest.approx(p.mu_av / p.t1_thermal, rel=1e-15)
        assert p.t_crossover == pytest.approx(
            p.gamma / p.mu_av * p.t1_thermal, rel=1e-15
        )


class TestDephasingBracket:
    def test_preconditions(self):
        with pytest.raises(PreconditionError):
            dephasing_bracket(1.0, 0.0, 1.0)
        with pytest.raises(PreconditionError):
            dephasing_bracket(1.0, 1.0, 0.0)
        with pytest.raises(PreconditionError):
            dephasing_bracket(-1.0, 1.0, 1.0)

    @pytest.mark.parametrize(
        "t,alpha,gamma",
        [(1e-6, 5e9, TAU * 0.5e6), (5e-4, 5e9, TAU * 0.5e6), (2.0, 0.3, 1.7)],
    )
    def test_matches_direct_quadrature(self, t, alpha, gamma):
        val, err = quad(lambda tau: (t - tau) / (gamma + alpha * tau), 0.0, t)
        assert dephasing_bracket(t, alpha, gamma) == pytest.approx(
            val, rel=1e-9, abs=err
        )

    def test_small_time_quadratic(self):
        alpha, gamma = 5e9, TAU * 0.5e6
        t = 1e-4 * gamma / alpha
        assert dephasing_bracket(t, alpha, gamma) == pytest.approx(
            t * t / (2.0 * gamma), rel=1e-4
        )

    def test_series_branch_is_continuous(self):
        alpha, gamma = 1.0, 1.0
        below = dephasing_bracket(0.999e-6, alpha, gamma)
        above = dephasing_bracket(1.001e-6, alpha, gamma)
        assert below < above
        # both sides of the series switch agree with the quadratic limit
        for t, v in ((0.999e-6, below), (1.001e-6, above)):
            assert v == pytest.approx(t * t / 2.0, rel=1e-5)

    def test_doubling_identity(self):
        # 2*B(t; alpha, gamma) = B(2t; alpha, 2*gamma), the change of window
        # convention used between per-realization and averaged cumulants
        t, alpha, gamma = 3e-4, 5e9, TAU * 0.5e6
        assert 2.0 * dephasing_bracket(t, alpha, gamma) == pytest.approx(
            dephasing_bracket(2.0 * t, alpha, 2.0 * gamma), rel=1e-12
        )

    def test_vector_input(self):
        out = dephasing_bracket(np.array([0.0, 1e-4]), 5e9, TAU * 0.5e6)
        assert out.shape == (2,)
        assert out[0] == 0.0


class TestAggregateLaw:
    def test_requires_strong_diffusion(self):
        with pytest.raises(PreconditionError):
            dephasing_law(_law(mu_av=TAU * 0.1e6, mu_max=TAU * 25e6), 0.0, 1e-6)

    def test_rejects_negative_inputs(self):
        with pytest.raises(PreconditionError):
            dephasing_law(_law(), -1.0, 1e-6)
        with pytest.raises(PreconditionError):
            dephasing_law(_law(), 0.0, -1e-6)

    def test_branches_in_order(self):
        p = _law()
        ts = np.array([0.1 * p.t_crossover, 0.5 * p.t1_thermal, 5.0 * p.t1_thermal])
        values, branches = dephasing_law_curve(p, 0.0, ts)
        assert branches.tolist() == [1, 2, 3]
        assert np.all(np.diff(values) > 0.0)

    def test_continuous_at_saturation(self):
        p = _law()
        below = dephasing_law(p, 0.0, p.t1_thermal * (1.0 - 1e-9))
        above = dephasing_law(p, 0.0, p.t1_thermal * (1.0 + 1e-9))
        assert above == pytest.approx(below, rel=1e-6)

    def test_scalar_output(self):
        value, branch = dephasing_law_curve(_law(), 0.0, 1e-6)
        assert isinstance(value, float)
        assert isinstance(branch, int)

    def test_modulation_suppresses_uniformly(self):
        p = _law()
        ts = np.geomspace(1e-7, 1e-2, 12)
        plain = dephasing_law(p, 0.0, ts)
        driven = dephasing_law(p, 10.0, ts)
        np.testing.assert_allclose(driven / plain, s4_factor(10.0), rtol=1e-12)

    def test_late_slope_matches_saturated_width(self):
        p = _law()
        s = s4_factor(0.0)
        t_a, t_b = 4.0 * p.t1_thermal, 6.0 * p.t1_thermal
        slope = (dephasing_law(p, 0.0, t_b) - dephasing_law(p, 0.0, t_a)) / (t_b - t_a)
        expected = (
            p.g_max**4 / p.delta_typ * s * (p.t1_thermal / p.mu_av)
            * math.log(p.mu_av / p.gamma)
        )
        assert slope == pytest.approx(expected, rel=1e-9)


class TestSmallDiffusionLaw:
    def test_preconditions(self):
        with pytest.raises(PreconditionError):
            small_diffusion_law(_law(), 0.0, 1e-6)  # mu_max >= gamma
        ok = _law(mu_av=TAU * 0.05e6, mu_max=TAU * 0.2e6, delta_typ=TAU * 2e6)
        with pytest.raises(PreconditionError):
            small_diffusion_law(ok, 0.0, 1e-6)  # delta_typ >= gamma

    def test_quadratic_in_time_with_hand_prefactor(self):
        p = _law(mu_av=TAU * 0.05e6, mu_max=TAU * 0.2e6, delta_typ=TAU * 0.3e6)
        t = 2e-5
        expected = (
            (p.gamma_1q * t) ** 2
            * (p.mu_max / p.gamma) ** 2
            * (p.delta_typ / p.gamma)
        )
        assert small_diffusion_law(p, 0.0, t) == pytest.approx(expected, rel=1e-12)
        assert small_diffusion_law(p, 0.0, 2.0 * t) == pytest.approx(
            4.0 * expected, rel=1e-12
        )


class TestCrossoverDiagnostics:
    def test_small_diffusion_classification(self):
        p = _law(mu_av=TAU * 0.05e6, mu_max=TAU * 0.2e6, delta_typ=TAU * 0.3e6)
        rep = crossover_diagnostics(p)
        assert rep.classification == "small-diffusion"
        expected = (
            p.gamma_1q
            * (p.mu_max / p.gamma)
            * math.sqrt(p.delta_typ / p.gamma)
        )
        assert rep.gamma_phi == pytest.approx(expected, rel=1e-12)

    def test_threshold_rate_inverts_the_law(self):
        p = _law()
        rep = crossover_diagnostics(p)
        assert rep.classification in (
            "quasi-static-dominant", "dynamical-subdominant"
        )
        assert dephasing_law(p, 0.0, 1.0 / rep.gamma_phi) == pytest.approx(
            1.0, rel=1e-9
        )

    def test_markov_number(self):
        p = _law()
        rep = crossover_diagnostics(p)
        assert rep.markov_number == pytest.approx(
            p.t1_thermal * p.gamma**2 / p.mu_av, rel=1e-12
        )
        assert rep.markov_ok == (rep.markov_number > 1.0)

    def test_weak_diffusion_rate_undefined(self):
        p = _law(mu_av=TAU * 0.2e6, mu_max=TAU * 2e6)
        rep = crossover_diagnostics(p)
        assert math.isnan(rep.gamma_phi)


def _tls(detuning=0.0, g=TAU * 0.05e6, mu_av=TAU * 5e6, e0=TAU * 5e9):
    return TlsParams(
        eps0=e0 - detuning, g=g, gamma=TAU * 0.5e6, mu_av=mu_av, mu_max=5.0 * mu_av
    )


class TestMeanCoefficient:
    def test_short_regime_hand_value(self):
        tls = _tls(detuning=TAU * 2e6)
        qubit = QubitParams(e0=TAU * 5e9)
        expected = 0.25 * tls.g**2 / (tls.mu_av - 1j * TAU * 2e6)
        assert mean_c(tls, qubit, "short") == pytest.approx(expected, rel=1e-12)

    def test_long_regime_hand_value(self):
        tls = _tls(detuning=TAU * 2e6)
        qubit = QubitParams(e0=TAU * 5e9)
        expected = 0.25 * tls.g**2 / (tls.gamma + tls.mu_av - 1j * TAU * 2e6)
        assert mean_c(tls, qubit, "long") == pytest.approx(expected, rel=1e-12)

    def test_short_regime_needs_strong_diffusion(self):
        with pytest.raises(PreconditionError):
            mean_c(_tls(mu_av=TAU * 0.1e6), QubitParams(e0=TAU * 5e9), "short")

    def test_unknown_regime(self):
        with pytest.raises(ConfigError):
            mean_c(_tls(), QubitParams(e0=TAU * 5e9), "both")


class TestCorrelator:
    def test_positive_rate_required(self):
        with pytest.raises(PreconditionError):
            correlator_closed(_tls(), QubitParams(e0=TAU * 5e9), 0.0, 0.0)

    def test_short_regime_decays_with_separation(self):
        tls = _tls()
        qubit = QubitParams(e0=TAU * 5e9)
        taus = np.linspace(0.0, 1e-3, 7)
        vals = [correlator_closed(tls, qubit, tau, 1e3) for tau in taus]
        assert all(v > 0.0 for v in vals)
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_long_regime_factorizes_at_saturation(self):
        tls = _tls(detuning=TAU * 3e6)
        qubit = QubitParams(e0=TAU * 5e9, a_mod=TAU * 20e6, omega_mod=TAU * 10e6)
        r = 1e3
        mc = mean_c(tls, qubit, "long")
        for tau in (1.0 / r, 3.0 / r):
            got = correlator_closed(tls, qubit, tau, r, regime="long")
            assert got == pytest.approx(abs(mc) ** 2, rel=1e-12)

    def test_unknown_regime(self):
        with pytest.raises(ConfigError):
            correlator_closed(_tls(), QubitParams(e0=TAU * 5e9), 0.0, 1e3, "x")


class TestShortTimeCumulant:
    def test_preconditions(self):
        tls = _tls()
        qubit = QubitParams(e0=TAU * 5e9)
        with pytest.raises(PreconditionError):
            cumulant_exact_shorttime(tls, qubit, 1.0, 0.0)
        with pytest.raises(PreconditionError):
            cumulant_exact_shorttime(tls, qubit, -1.0, 1e3)
        with pytest.raises(PreconditionError):
            cumulant_exact_shorttime(tls, qubit, 2e-3, 1e3)  # beyond 1/r

    def test_quiet_tls_contributes_nothing(self):
        tls = TlsParams(eps0=TAU * 5e9, g=TAU * 0.05e6, gamma=TAU * 0.5e6,
                        mu_av=0.0, mu_max=0.0)
        assert cumulant_exact_shorttime(tls, QubitParams(e0=TAU * 5e9), 1e-4, 1e3) == 0.0

    @pytest.mark.parametrize("driven", [False, True])
    def test_equals_windowed_correlator_integral(self, driven):
        # K(t) must equal int_0^{2t} (2t - tau) <dC dC*>(tau) dtau; the two
        # routes share no code beyond the resonance weights
        tls = _tls(detuning=TAU * 1e6)
        if driven:
            qubit = QubitParams(e0=TAU * 5e9, a_mod=TAU * 24e6, omega_mod=TAU * 12e6)
        else:
            qubit = QubitParams(e0=TAU * 5e9)
        r = 1e3
        t = 4e-4
        direct, err = quad(
            lambda tau: (2.0 * t - tau) * correlator_closed(tls, qubit, tau, r),
            0.0,
            2.0 * t,
            limit=200,
        )
        assert cumulant_exact_shorttime(tls, qubit, t, r) == pytest.approx(
            direct, rel=1e-10
        )

    def test_increasing_from_zero(self):
        tls = _tls()
        qubit = QubitParams(e0=TAU * 5e9)
        ts = np.linspace(0.0, 1e-3, 9)
        ks = cumulant_exact_shorttime(tls, qubit, ts, 1e3)
        assert ks[0] == 0.0
        assert np.all(np.diff(ks) > 0.0)


class TestCumulantAsymptotes:
    def test_quadratic_limit(self):
        tls = _tls()
        qubit = QubitParams(e0=TAU * 5e9)
        r = 1e3
        alpha = tls.mu_av * r
        t = 0.01 * tls.gamma / alpha
        exact = cumulant_exact_shorttime(tls, qubit, t, r)
        approx = cumulant_shorttime_asymptote(tls, qubit, t, r, "quadratic")
        assert approx == pytest.approx(exact, rel=0.01)

    def test_dynamical_limit(self):
        tls = _tls(mu_av=TAU * 5e9)
        qubit = QubitParams(e0=TAU * 5e9)
        r = 1e3
        alpha = tls.mu_av * r
        t = 2000.0 * tls.gamma / alpha
        assert t <= 1.0 / r
        exact = cumulant_exact_shorttime(tls, qubit, t, r)
        approx = cumulant_shorttime_asymptote(tls, qubit, t, r, "dynamical")
        assert approx == pytest.approx(exact, rel=0.05)

    def test_dynamical_needs_wide_diffusion(self):
        tls = _tls()
        qubit = QubitParams(e0=TAU * 5e9)
        with pytest.raises(PreconditionError):
            cumulant_shorttime_asymptote(tls, qubit, 1e-7, 1e3, "dynamical")

    def test_unknown_regime(self):
        with pytest.raises(ConfigError):
            cumulant_shorttime_asymptote(_tls(), QubitParams(e0=TAU * 5e9),
                                         1e-4, 1e3, "cubic")


class TestRelaxationCumulant:
    def test_long_regime_is_pure_mean_decay(self):
        ens = [_tls(detuning=TAU * 1e6), _tls(detuning=-TAU * 2e6)]
        qubit = QubitParams(e0=TAU * 5e9)
        t = 5e-3
        expected = -sum(mean_c(tls, qubit, "long").real for tls in ens) * t
        assert relaxation_cumulant(ens, qubit, t, 1e3, "long") == pytest.approx(
            expected, rel=1e-12
        )

    def test_short_regime_fluctuations_slow_the_decay(self):
        ens = [_tls()]
        qubit = QubitParams(e0=TAU * 5e9)
        t = 5e-4
        mean_only = -mean_c(ens[0], qubit, "short").real * t
        got = relaxation_cumulant(ens, qubit, t, 1e3, "short")
        assert got > mean_only

    def test_short_regime_window(self):
        with pytest.raises(PreconditionError):
            relaxation_cumulant([_tls()], QubitParams(e0=TAU * 5e9), 2e-3, 1e3)


class TestResonanceSums:
    def test_device_estimate(self):
        p = _law()
        assert resonance_sum_estimate(p) == pytest.approx(
            p.g_max**4 / (p.delta_typ * p.mu_av), rel=1e-15
        )

    def test_single_resonant_tls(self):
        tls = _tls(detuning=0.0)
        got = resonance_sum_ensemble([tls], QubitParams(e0=TAU * 5e9))
        assert got == pytest.approx(tls.g**4 / tls.mu_av**2, rel=1e-12)

    def test_requires_diffusion(self):
        tls = TlsParams(eps0=TAU * 5e9, g=TAU * 0.05e6, gamma=TAU * 0.5e6,
                        mu_av=0.0, mu_max=0.0)
        with pytest.raises(PreconditionError):
            resonance_sum_ensemble([tls], QubitParams(e0=TAU * 5e9))


class TestTemperatureScalings:
    def test_calibration_validation(self):
        with pytest.raises(ConfigError):
            TemperatureCalibration(c_mu=0.0, c_r=1.0)

    def test_map_hand_values(self):
        cal = TemperatureCalibration(c_mu=TAU * 10e6, c_r=8e6)
        scales = temperature_map(cal, 0.1)
        assert scales.mu_av == pytest.approx(TAU * 1e6, rel=1e-12)
        assert scales.t1_thermal == pytest.approx(1.0 / (8e6 * 1e-3), rel=1e-12)

    def test_map_rejects_nonpositive_temperature(self):
        cal = TemperatureCalibration(c_mu=1.0, c_r=1.0)
        with pytest.raises(PreconditionError):
            temperature_map(cal, np.array([0.1, -0.2]))

    def test_sweep_structure(self):
        base = _law(mu_av=TAU * 0.5e6, mu_max=TAU * 0.5e6, delta_typ=TAU * 0.25e6)
        cal = TemperatureCalibration(c_mu=TAU * 10e6, c_r=8e6)
        temps = 0.05 * 10.0 ** (np.arange(-4, 9) / 8.0)
        res = temperature_sweep(base, cal, temps)
        assert res.temps.shape == res.gamma_phi.shape == res.gamma_phi_long.shape
        assert np.all(np.isfinite(res.gamma_phi))
        assert np.all(res.gamma_phi > 0.0)
        below = res.mu_av <= base.gamma
        assert np.all(np.isnan(res.gamma_phi_long[below]))
        assert np.all(res.gamma_phi_long[~below] > 0.0)

    def test_sweep_rejects_nonpositive_temperature(self):
        base = _law()
        cal = TemperatureCalibration(c_mu=1.0, c_r=1.0)
        with pytest.raises(PreconditionError):
            temperature_sweep(base, cal, [0.0, 0.1])
