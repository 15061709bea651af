import numpy as np
import pytest

from sdrdiff.curve import DecayCurve
from sdrdiff.decay import sdr_scan
from sdrdiff.errors import InsufficientDataError, NormalizationError
from sdrdiff.estimation import FitOptions, fit_diameter, model_signal, normalize_first_point, residuals
from sdrdiff.noise import AcquisitionParams, Geometry, build_spectrum

D0 = 2.3e-9
TE, N = 0.08, 8


def synthetic(diameter=5e-6, gradient=0.216, n_points=20, amplitude=1.0, mode="single"):
    acq = AcquisitionParams(gradient=gradient)
    spec = build_spectrum(Geometry("cylinder", diameter, D0), acq, mode)
    x = np.linspace(TE / N / n_points, TE / N, n_points)
    curve = sdr_scan(N, TE, spec, x, acq=acq)
    return curve.with_signal(amplitude * curve.signal)


def test_normalize_constant_curve():
    c = DecayCurve(np.arange(1.0, 6.0), np.full(5, 0.4), TE, N)
    np.testing.assert_array_equal(normalize_first_point(c).signal, 1.0)


def test_normalize_is_scale_invariant():
    c = synthetic()
    a = normalize_first_point(c).signal
    b = normalize_first_point(c.with_signal(0.5 * c.signal)).signal
    np.testing.assert_allclose(a, b, rtol=1e-15)
    assert a[0] == 1.0


@pytest.mark.parametrize("first", [0.0, -0.1])
def test_normalize_rejects_nonpositive_first_point(first):
    c = DecayCurve(np.arange(1.0, 4.0), np.array([first, 0.5, 0.5]), TE, N)
    with pytest.raises(NormalizationError):
        normalize_first_point(c)


def test_residuals_vanish_on_model_data():
    c = synthetic()
    np.testing.assert_allclose(residuals(c, (5e-6, 1.0), "cylinder", D0), 0.0, atol=1e-15)


def test_amplitude_mismatch_gives_constant_relative_residual():
    c = synthetic(amplitude=0.8)
    r = residuals(c, (5e-6, 1.0), "cylinder", D0)
    np.testing.assert_allclose(r / c.signal, 0.25, rtol=1e-12)


def test_round_trip_noiseless():
    res = fit_diameter(normalize_first_point(synthetic(amplitude=0.83)), "cylinder", D0)
    assert res.converged
    assert res.diameter == pytest.approx(5e-6, rel=0.01)
    assert res.residual_rms < 1e-8
    assert res.d0 == D0 and not res.d0_fitted
    assert len(res.covariance_diag) == 2 and all(v >= 0 for v in res.covariance_diag)


@pytest.mark.parametrize("diameter", [3e-6, 8e-6])
@pytest.mark.parametrize("gradient", [0.144, 0.216])
def test_round_trip_other_sizes(diameter, gradient):
    res = fit_diameter(normalize_first_point(synthetic(diameter, gradient)), "cylinder", D0)
    assert res.diameter == pytest.approx(diameter, rel=0.01)


def test_round_trip_multi_mode():
    c = normalize_first_point(synthetic(mode="multi:4"))
    res = fit_diameter(c, "cylinder", D0, FitOptions(spectrum_mode="multi:4"))
    assert res.diameter == pytest.approx(5e-6, rel=0.01)


def test_single_vs_multi_bias_is_bounded():
    # data from the multi-mode model, fitted with the single-Lorentzian one
    c = normalize_first_point(synthetic(mode="multi:6"))
    single = fit_diameter(c, "cylinder", D0).diameter
    multi = fit_diameter(c, "cylinder", D0, FitOptions(spectrum_mode="multi:6")).diameter
    assert abs(single / multi - 1) < 0.2


def test_joint_d0_fit_runs():
    c = normalize_first_point(synthetic())
    res = fit_diameter(c, "cylinder", D0 * 1.3, FitOptions(fit_d0=True))
    assert res.d0_fitted
    assert len(res.covariance_diag) == 3
    # d and D0 are partly degenerate through tau_c; the fit must still describe the data
    assert res.residual_rms < 1e-4


@pytest.mark.slow
def test_noise_realizations():
    clean = synthetic()
    rng = np.random.default_rng(12)
    rel_err = []
    for _ in range(100):
        noisy = clean.with_signal(clean.signal * (1 + 0.01 * rng.standard_normal(len(clean))))
        rel_err.append(abs(fit_diameter(normalize_first_point(noisy), "cylinder", D0).diameter / 5e-6 - 1))
    assert np.median(rel_err) < 0.05


def test_fitted_rms_below_noise_floor():
    clean = synthetic()
    rng = np.random.default_rng(3)
    noisy = clean.with_signal(clean.signal * (1 + 0.01 * rng.standard_normal(len(clean))))
    c = normalize_first_point(noisy)
    res = fit_diameter(c, "cylinder", D0)
    assert res.residual_rms < 0.01 * np.sqrt(2)


def test_too_few_points():
    c = synthetic(n_points=4)
    with pytest.raises(InsufficientDataError):
        fit_diameter(c, "cylinder", D0)


def test_x_range_must_bracket_a_correlation_time():
    c = synthetic()
    opts = FitOptions(d_min=50e-6, d_max=100e-6)  # tau_c >= 70 ms, beyond every x
    with pytest.raises(InsufficientDataError):
        fit_diameter(c, "cylinder", D0, opts)


def test_model_needs_gradient():
    c = DecayCurve(np.linspace(1e-3, 1e-2, 5), np.ones(5), TE, N)
    with pytest.raises(ValueError):
        model_signal(c, "cylinder", 5e-6, D0)
