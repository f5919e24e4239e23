import numpy as np
import pytest

from leafkit.errors import FormatError, ParamError, SpecError
from leafkit.filterbank import (
    SIGMA_MIN,
    GaborFilterbank,
    analytic_freq_response,
    from_csv,
    gabor_kernel,
    kernel_matrix,
    negative_frequency_energy_fraction,
    numeric_freq_response,
    project_params,
    sigma_max,
    to_csv,
)

HALF_MAX_WIDTH = np.sqrt(2.0 * np.log(2.0))


def test_kernel_peak_modulus():
    for eta, sigma in ((0.1, 5.0), (0.7, 20.0)):
        k = gabor_kernel(eta, sigma, 401)
        assert abs(k[200]) == pytest.approx(1.0 / (np.sqrt(2 * np.pi) * sigma), rel=1e-12)


def test_kernel_even_modulus():
    k = gabor_kernel(0.37, 12.0, 201)
    np.testing.assert_allclose(np.abs(k), np.abs(k[::-1]), rtol=1e-12)


def test_kernel_zero_eta_is_real():
    k = gabor_kernel(0.0, 8.0, 101)
    assert np.all(k.imag == 0.0)


def test_kernel_matrix_matches_single():
    fb = GaborFilterbank(np.array([0.2, 0.6]), np.array([5.0, 15.0]), 101)
    k_re, k_im = kernel_matrix(fb)
    for i in range(2):
        single = gabor_kernel(fb.eta[i], fb.sigma_bw[i], 101)
        np.testing.assert_allclose(k_re[i], single.real, rtol=1e-15)
        np.testing.assert_allclose(k_im[i], single.imag, rtol=1e-15)


def test_kernel_invalid_sigma():
    with pytest.raises(ParamError):
        gabor_kernel(0.5, 0.0, 101)


def test_analytic_response_peak_and_half_maximum():
    eta, sigma = 0.4, 10.0
    sigma_f = 1.0 / (np.pi * sigma)
    assert analytic_freq_response(eta, sigma, np.array([eta]))[0] == 1.0
    half_points = np.array([eta - HALF_MAX_WIDTH * sigma_f, eta + HALF_MAX_WIDTH * sigma_f])
    np.testing.assert_allclose(
        analytic_freq_response(eta, sigma, half_points), [0.5, 0.5], atol=1e-12
    )


def test_analytic_response_narrowband_limit():
    response = analytic_freq_response(0.5, 500.0, np.array([0.4, 0.6]))
    assert np.all(response < 1e-300)


def test_numeric_response_impulse_flat():
    impulse = np.zeros(11, dtype=complex)
    impulse[5] = 1.0
    resp = numeric_freq_response(impulse, 64)
    np.testing.assert_allclose(resp, 1.0, rtol=1e-12)


def test_numeric_response_peak_location():
    k = gabor_kernel(0.5, 20.0, 401)
    resp = numeric_freq_response(k, 2048)
    peak_bin = int(np.argmax(resp))
    expected_bin = 0.5 * (2048 / 2)
    assert abs(peak_bin - expected_bin) <= 1.0


def test_numeric_response_peak_matches_analytic():
    # 1% relative at the peak for sigma >= 10, W >= 8*sigma
    for eta, sigma in ((0.3, 10.0), (0.6, 25.0), (0.8, 39.0)):
        k = gabor_kernel(eta, sigma, 401)
        resp = numeric_freq_response(k, 4096)
        assert float(resp.max()) == pytest.approx(1.0, rel=0.01)


def test_numeric_response_validates_nfft():
    k = gabor_kernel(0.5, 10.0, 101)
    with pytest.raises(SpecError):
        numeric_freq_response(k, 64)
    with pytest.raises(SpecError):
        numeric_freq_response(k, 300)


def test_analytic_vs_numeric_pointwise():
    # 100 random feasible filters, W >= 8*sigma: <= 2% absolute, peak-normalized
    rng = np.random.default_rng(99)
    n_fft = 4096
    grid = np.arange(n_fft // 2 + 1) * 2.0 / n_fft
    for _ in range(100):
        eta = rng.uniform(0.0, 1.0)
        sigma = rng.uniform(SIGMA_MIN, sigma_max(16000, 401))
        numeric = numeric_freq_response(gabor_kernel(eta, sigma, 401), n_fft)
        numeric = numeric / numeric.max()
        analytic = analytic_freq_response(eta, sigma, grid)
        analytic = analytic / analytic.max()
        assert float(np.max(np.abs(numeric - analytic))) < 0.02


def test_negative_frequency_energy_small():
    # eta >= 3*sigma_f guards the DC-side leak; the matching margin below
    # Nyquist keeps band-edge aliasing (a separate effect) out of the check
    rng = np.random.default_rng(5)
    for _ in range(30):
        sigma = rng.uniform(SIGMA_MIN, sigma_max(16000, 401))
        sigma_f = 1.0 / (np.pi * sigma)
        eta = rng.uniform(3.0 * sigma_f, 1.0 - 3.0 * sigma_f)
        frac = negative_frequency_energy_fraction(gabor_kernel(eta, sigma, 401), 4096)
        assert frac < 0.01


def test_project_params_clamps():
    fb = GaborFilterbank(np.array([1.2, -0.1, 0.5]), np.array([0.0, 500.0, 10.0]), 401)
    out = project_params(fb, 16000)
    np.testing.assert_allclose(out.eta, [1.0, 0.0, 0.5])
    assert out.sigma_bw[0] == SIGMA_MIN
    assert out.sigma_bw[1] == pytest.approx(16000 / 402.0)
    assert out.sigma_bw[2] == 10.0


def test_project_params_idempotent_identity():
    fb = GaborFilterbank(np.array([0.3, 0.9]), np.array([5.0, 30.0]), 401)
    once = project_params(fb, 16000)
    np.testing.assert_array_equal(once.eta, fb.eta)
    np.testing.assert_array_equal(once.sigma_bw, fb.sigma_bw)
    twice = project_params(once, 16000)
    np.testing.assert_array_equal(twice.eta, once.eta)
    np.testing.assert_array_equal(twice.sigma_bw, once.sigma_bw)


def test_csv_roundtrip_bitwise():
    rng = np.random.default_rng(1)
    fb = GaborFilterbank(np.sort(rng.uniform(0, 1, 40)), rng.uniform(2, 39, 40), 401)
    text = to_csv(fb, 16000, header_comments=["strategy kind=random seed=1"])
    back = from_csv(text)
    assert back.kernel_width == 401
    np.testing.assert_array_equal(back.eta, fb.eta)
    np.testing.assert_array_equal(back.sigma_bw, fb.sigma_bw)


def test_csv_rejects_garbage():
    with pytest.raises(FormatError):
        from_csv("not,a,filterbank\n1,2,3\n")
    with pytest.raises(FormatError):
        from_csv("filter_index,eta,sigma_bw,centre_hz,fwhm_hz\n")
