import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdrdiff.decay import (
    AsymptoteWarning,
    delta_m_sdr,
    log_contrast_from_length,
    restricted_asymptote,
    sdr_decay,
    sdr_scan,
    variance_exact,
    variance_quadrature,
)
from sdrdiff.errors import DecompositionError
from sdrdiff.noise import GAMMA_1H, AcquisitionParams, NoiseSpectrum, build_spectrum, restriction_length
from sdrdiff.sequence import ModulationFunction, build_cpmg, build_hahn, build_sdr

from oracles import (
    free_cpmg_variance,
    free_hahn_variance,
    hahn_variance,
    pulse_boundaries,
    variance_double_integral,
)


def test_hahn_worked_example():
    # dw2 = 1, tau_c = 1, y = TE = 10
    res = variance_exact(build_hahn(10.0), NoiseSpectrum.lorentzian(1.0, 1.0))
    assert res.variance_half == pytest.approx(7.026906, abs=5e-7)
    assert res.magnetization == pytest.approx(math.exp(-7.026906), rel=1e-6)


@pytest.mark.parametrize("tau", [1e-5, 1e-3, 0.1, 1.0, 10.0, 1e3])
def test_hahn_closed_form(tau):
    spec = NoiseSpectrum.lorentzian(3.0, tau)
    assert variance_exact(build_hahn(1.0), spec).variance_half == pytest.approx(hahn_variance(3.0, tau, 1.0), rel=1e-9)


@pytest.mark.parametrize("n, frac, tau", [(2, 0.5, 0.1), (3, 0.2, 0.05), (4, 1.0, 0.3), (3, 0.9, 2.0)])
def test_matches_double_integral(n, frac, tau):
    x = frac / n
    spec = NoiseSpectrum.lorentzian(1.0, tau)
    expected = variance_double_integral(pulse_boundaries(n, x, 1.0), 1.0, tau)
    assert variance_exact(build_sdr(n, x, 1.0), spec).variance_half == pytest.approx(expected, rel=1e-8)


def test_small_segment_series_branch():
    # segments far shorter than tau exercise the cancellation-free branch
    spec = NoiseSpectrum.lorentzian(1.0, 1e4)
    seq = build_sdr(4, 0.2, 1.0)
    expected = variance_double_integral(pulse_boundaries(4, 0.2, 1.0), 1.0, 1e4)
    assert variance_exact(seq, spec).variance_half == pytest.approx(expected, rel=1e-7)


@given(
    st.integers(1, 32),
    st.floats(0.02, 1.0),
    st.floats(-4, 1),
)
@settings(max_examples=60)
def test_quadrature_agrees_with_exact(n, frac, log_tau):
    seq = build_sdr(n, frac / n, 1.0)
    spec = NoiseSpectrum.lorentzian(1.0, 10**log_tau)
    a = variance_exact(seq, spec).variance_half
    b = variance_quadrature(seq, spec).variance_half
    assert b == pytest.approx(a, rel=1e-6)


def test_quadrature_multi_lorentzian(cylinder, acq):
    spec = build_spectrum(cylinder, acq, "multi:5")
    seq = build_sdr(8, 2e-3, 0.08)
    assert variance_quadrature(seq, spec).variance_half == pytest.approx(
        variance_exact(seq, spec).variance_half, rel=1e-6
    )


def test_arbitrary_modulation():
    f = ModulationFunction(np.array([0.0, 0.1, 0.5, 0.6, 1.0]), initial_sign=-1)
    spec = NoiseSpectrum.lorentzian(2.0, 0.2)
    a = variance_exact(f, spec).variance_half
    assert variance_quadrature(f, spec).variance_half == pytest.approx(a, rel=1e-6)


def test_zero_gradient_gives_unit_magnetization(cylinder):
    spec = build_spectrum(cylinder, AcquisitionParams(gradient=0.0))
    seq = build_sdr(8, 1e-3, 0.08)
    assert variance_exact(seq, spec).magnetization == 1.0
    assert variance_quadrature(seq, spec).magnetization == 1.0


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16])
def test_free_diffusion_limit(n):
    te, d0, g = 0.05, 2.3e-9, 0.2
    tau = 100 * te
    spec = NoiseSpectrum.lorentzian(GAMMA_1H**2 * g**2 * d0 * tau, tau)
    expected = free_cpmg_variance(GAMMA_1H, g, d0, te, n)
    assert variance_exact(build_cpmg(n, te), spec).variance_half == pytest.approx(expected, rel=0.01)


def test_free_limit_hahn_matches_oracle():
    te, d0, g = 0.05, 2.3e-9, 0.2
    tau = 100 * te
    spec = NoiseSpectrum.lorentzian(GAMMA_1H**2 * g**2 * d0 * tau, tau)
    assert variance_exact(build_hahn(te), spec).variance_half == pytest.approx(
        free_hahn_variance(GAMMA_1H, g, d0, te), rel=0.01
    )


@pytest.mark.parametrize("n", [1, 2, 4])
def test_restricted_asymptote(n):
    tau = 1e-3
    spec = NoiseSpectrum.lorentzian(50.0, tau)
    seq = build_cpmg(n, 100 * tau)
    asym = restricted_asymptote(seq, spec)
    assert asym.regime_ok
    exact = variance_exact(seq, spec).variance_half
    assert asym.variance_half == pytest.approx(exact, rel=1e-6)
    # dropped terms are of order exp(-x / tau_c)
    assert asym.shift == pytest.approx(spec.delta_omega_sq * tau * seq.total_time - exact, rel=1e-4)


def test_asymptote_warns_outside_regime():
    spec = NoiseSpectrum.lorentzian(1.0, 1.0)
    with pytest.warns(AsymptoteWarning):
        res = restricted_asymptote(build_cpmg(8, 8.0), spec)
    assert not res.regime_ok


@pytest.mark.parametrize("n", [4, 8, 16])
@pytest.mark.parametrize("strength", [0.001, 0.01, 0.05])
def test_contrast_identity(n, strength):
    tau = 1e-3
    spec = NoiseSpectrum.lorentzian(strength / tau**2, tau)
    res = delta_m_sdr(n, spec, 200 * tau)
    # the identity drops exp(-x / 2 tau_c) terms; x = 12.5 tau_c at N = 16
    assert res.numeric == pytest.approx(res.closed_form, rel=1e-3)
    assert res.log_contrast == pytest.approx(2 * (n - 1) * strength)


def test_contrast_from_restriction_length(cylinder, acq):
    spec = build_spectrum(cylinder, acq)
    l_c = restriction_length(spec.tau_c, cylinder.d0)
    expected = 2 * 7 * spec.delta_omega_sq * spec.tau_c**2
    assert log_contrast_from_length(8, l_c, acq.gamma, acq.gradient, cylinder.d0) == pytest.approx(expected, rel=1e-12)


def test_contrast_size_at_reference_parameters(cylinder, acq):
    spec = build_spectrum(cylinder, acq)
    assert delta_m_sdr(8, spec, 0.08).closed_form == pytest.approx(0.0436, abs=5e-4)


@given(st.integers(2, 24), st.floats(0.05, 1.0), st.floats(-3, 1))
@settings(max_examples=60)
def test_three_factor_product(n, frac, log_tau):
    seq = build_sdr(n, frac / n, 1.0)
    spec = NoiseSpectrum.lorentzian(0.5, 10**log_tau)
    parts = sdr_decay(seq, spec)
    assert parts.product == pytest.approx(parts.total.magnetization, rel=1e-10)


@pytest.mark.parametrize("n, frac, tau", [(2, 0.4, 0.1), (8, 0.3, 0.01), (5, 1.0, 0.5)])
def test_three_factor_quadrature(n, frac, tau):
    seq = build_sdr(n, frac / n, 1.0)
    spec = NoiseSpectrum.lorentzian(1.0, tau)
    exact = sdr_decay(seq, spec)
    quad = sdr_decay(seq, spec, method="quadrature")
    for a, b in [(exact.cpmg, quad.cpmg), (exact.hahn, quad.hahn), (exact.total, quad.total)]:
        assert b.variance_half == pytest.approx(a.variance_half, rel=1e-6)
    scale = exact.cpmg.variance_half + exact.hahn.variance_half
    assert abs(quad.cross.variance_half - exact.cross.variance_half) <= 1e-6 * scale


def test_three_factor_needs_two_pulses():
    with pytest.raises(DecompositionError):
        sdr_decay(build_hahn(1.0), NoiseSpectrum.lorentzian(1.0, 1.0))


def test_scan_endpoints(cylinder, acq):
    spec = build_spectrum(cylinder, acq)
    te, n = 0.08, 8
    curve = sdr_scan(n, te, spec, [1e-9, te / n], acq=acq)
    assert curve.signal[-1] == variance_exact(build_cpmg(n, te), spec).magnetization
    assert curve.signal[0] == pytest.approx(variance_exact(build_hahn(te), spec).magnetization, rel=1e-6)


def test_scan_t2_factor(cylinder, acq):
    spec = build_spectrum(cylinder, acq)
    x = [1e-3, 5e-3]
    plain = sdr_scan(8, 0.08, spec, x).signal
    damped = sdr_scan(8, 0.08, spec, x, t2=0.1).signal
    np.testing.assert_allclose(damped, plain * math.exp(-0.8), rtol=1e-14)


def test_hahn_decays_faster_than_cpmg_when_restricted(cylinder, acq):
    spec = build_spectrum(cylinder, acq)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for te in (0.02, 0.08, 0.12):
            assert variance_exact(build_hahn(te), spec).magnetization < variance_exact(build_cpmg(8, te), spec).magnetization
