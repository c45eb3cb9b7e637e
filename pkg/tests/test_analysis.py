import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import curve_fit

from ybqubit.analysis import (DataSeries, exp_decay, find_peaks, fit_branching_saturation,
                              fit_exponential_decay, fit_gaussian_decay, fit_sinusoid,
                              gaussian_decay, levenberg_marquardt, parity, saturation_power, sinusoid)
from ybqubit.errors import (ConstraintViolation, FitError, InsufficientDataError,
                            UnderConstrainedError)

GAMMA = 1 / 8.07e-9


def test_data_series_invariants(tmp_path):
    with pytest.raises(ConstraintViolation):
        DataSeries([0, 1], [1, 2], sigma=[1, 0])
    with pytest.raises(ConstraintViolation):
        DataSeries([0, 0, 1], [1, 2, 3]).require_increasing()
    s = DataSeries([0, 1], [2, 3], [0.5, 0.5], "time_s", "counts")
    s.write_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "time_s,counts,sigma_counts"


def test_exponential_exact_recovery():
    x = np.linspace(0, 2, 50)
    fit = fit_exponential_decay(x, exp_decay(x, 2.0, 3.0, 1.0))
    assert fit.converged
    assert fit.values == pytest.approx([2.0, 3.0, 1.0], rel=1e-6)
    assert fit.reduced_chi2 < 1e-20


def test_exponential_matches_curve_fit_on_noisy_data():
    rng = np.random.default_rng(4)
    x = np.linspace(0, 5e-6, 200)
    sigma = np.full_like(x, 0.05)
    y = exp_decay(x, 1.5, 8e5, 0.3) + rng.normal(0, 0.05, x.size)
    ours = fit_exponential_decay(x, y, sigma)
    ref, cov = curve_fit(exp_decay, x, y, p0=(1.0, 5e5, 0.2), sigma=sigma)
    assert ours.values == pytest.approx(ref, rel=1e-6)
    assert np.sqrt(np.diag(ours.covariance)) == pytest.approx(np.sqrt(np.diag(cov)), rel=1e-4)


def test_reduced_chi2_distribution_on_correct_weights():
    rng = np.random.default_rng(8)
    x = np.linspace(0, 3, 200)
    chis = []
    for _ in range(20):
        y = exp_decay(x, 5.0, 1.3, 2.0) + rng.normal(0, 0.2, x.size)
        chis.append(fit_exponential_decay(x, y, np.full_like(x, 0.2)).reduced_chi2)
    assert all(0.5 <= c <= 1.5 for c in chis)
    assert np.mean(chis) == pytest.approx(1.0, abs=0.1)


def test_exponential_flat_data_is_degenerate():
    fit = fit_exponential_decay(np.arange(10.0), np.full(10, 4.0))
    assert fit.degenerate and fit["b"] == 0.0 and fit["c"] == 4.0


def test_exponential_needs_four_points():
    with pytest.raises(InsufficientDataError):
        fit_exponential_decay([0, 1, 2], [3, 2, 1])


def test_iteration_limit_is_flagged():
    x = np.linspace(0, 2, 50)
    fit = levenberg_marquardt(exp_decay, x, exp_decay(x, 2.0, 3.0, 1.0), (1.0, 1.0, 0.0), max_iter=1)
    assert not fit.converged and fit.message == "iteration limit reached"


def test_fit_result_serialization_and_covariance():
    x = np.linspace(0, 2, 30)
    y = exp_decay(x, 2.0, 3.0, 1.0) + 0.01 * np.sin(7 * x)
    fit = fit_exponential_decay(x, y)
    d = json.loads(fit.to_json())
    assert set(d["parameters"]) == {"A", "b", "c"}
    C = np.array(d["covariance"])
    assert np.allclose(C, C.T)
    assert np.linalg.eigvalsh(C).min() >= -1e-12 * np.abs(C).max()


def test_saturation_exact_recovery():
    gR = GAMMA * 0.00501
    b = np.array([0.2, 0.5, 1, 2.9, 5, 10]) / (2 * (1 + np.array([0.2, 0.5, 1, 2.9, 5, 10]))) * gR
    p = saturation_power(b, 10e-6, gR)
    fit = fit_branching_saturation(b, p, 0.1 * p, gamma=GAMMA, gamma_rel_err=0.09 / 8.07)
    assert fit["p_sat"] == pytest.approx(10e-6, rel=1e-6)
    assert fit["gammaR"] == pytest.approx(gR, rel=1e-6)
    assert fit["R"] == pytest.approx(0.00501, rel=1e-6)
    assert fit["R_stderr"] >= fit["R"] * 0.09 / 8.07


def test_saturation_matches_curve_fit():
    rng = np.random.default_rng(2)
    gR = GAMMA * 0.00501
    s = np.array([0.2, 0.5, 1, 2.9, 5, 10])
    p = s * 10e-6
    b = s / (2 * (1 + s)) * gR * (1 + rng.normal(0, 0.01, s.size))
    ours = fit_branching_saturation(b, p, 0.1 * p)
    ref, cov = curve_fit(lambda bb, ps, g: 2 * bb * ps / (g - 2 * bb), b, p, p0=(8e-6, 1.1 * gR),
                         sigma=0.1 * p)
    assert ours.values == pytest.approx(ref, rel=1e-5)
    assert np.sqrt(np.diag(ours.covariance)) == pytest.approx(np.sqrt(np.diag(cov)), rel=1e-3)


def test_saturation_resampled_power_errors_cover_truth():
    # +-10% uniform errors on each power, refit 100 times.
    rng = np.random.default_rng(11)
    gR = GAMMA * 0.00501
    s = np.array([0.2, 0.5, 1, 2.9, 5, 10])
    b = s / (2 * (1 + s)) * gR
    p_true = s * 10e-6
    inside = 0
    for _ in range(100):
        p = p_true * (1 + rng.uniform(-0.1, 0.1, s.size))
        fit = fit_branching_saturation(b, p, 0.1 * p, gamma=GAMMA)
        inside += abs(fit["R"] - 0.00501) <= 3 * fit["R_stderr"]
    assert inside >= 95


def test_saturation_guard():
    # Decay constants that fall with power admit no gammaR above 2 max(b).
    b = np.array([3e5, 2e5, 1e5])
    p = np.array([1e-6, 2e-6, 3e-6])
    with pytest.raises(FitError, match="no saturation"):
        fit_branching_saturation(b, p, 0.1 * p)
    assert np.isinf(saturation_power([1e5, 2e5], 1e-5, 3e5)).tolist() == [False, True]
    with pytest.raises(ConstraintViolation):
        fit_branching_saturation([1e5, -1, 2e5], [1, 2, 3])
    with pytest.raises(InsufficientDataError):
        fit_branching_saturation([1e5, 2e5], [1, 2])


def test_sinusoid_rabi_frequency():
    t = np.linspace(0, 60e-6, 41)
    y = 0.5 - 0.5 * np.cos(np.pi * t / 6e-6)
    fit = fit_sinusoid(t, y)
    assert fit["f"] == pytest.approx(1 / 12e-6, rel=1e-6)
    assert fit["A"] == pytest.approx(0.5, rel=1e-6)
    assert fit["offset"] == pytest.approx(0.5, rel=1e-6)


def test_sinusoid_parity_period():
    dt = np.linspace(0, 1e-3, 41)
    rng = np.random.default_rng(3)
    y = 0.5 * np.cos(2 * np.pi * 2430 * dt + 0.7) + rng.normal(0, 0.02, dt.size)
    fit = fit_sinusoid(dt, y, np.full_like(dt, 0.02))
    assert 1 / fit["f"] == pytest.approx(411.5e-6, rel=0.01)


@given(A=st.floats(0.1, 2), f=st.floats(1.5, 6), phi=st.floats(-3, 3), off=st.floats(-1, 1))
def test_sinusoid_exact_recovery(A, f, phi, off):
    x = np.linspace(0, 2, 80)
    fit = fit_sinusoid(x, sinusoid(x, A, f, phi, off))
    assert fit["A"] == pytest.approx(A, rel=1e-6)
    assert fit["f"] == pytest.approx(f, rel=1e-6)
    assert math.cos(fit["phi"] - phi) == pytest.approx(1.0, abs=1e-9)


def test_sinusoid_degenerate_and_underconstrained():
    assert fit_sinusoid(np.arange(10.0), np.full(10, 0.3)).degenerate
    x = np.linspace(0, 0.4, 20)
    with pytest.raises(UnderConstrainedError):
        fit_sinusoid(x, np.cos(2 * np.pi * x))


def test_gaussian_exact_recovery_and_flag():
    T = np.linspace(0, 3.5, 8)
    fit = fit_gaussian_decay(T, gaussian_decay(T, 0.5, 2.5))
    assert fit.values == pytest.approx([0.5, 2.5], rel=1e-6)
    flat = fit_gaussian_decay(T, np.full(8, 0.5) + 0.001 * np.arange(8))
    assert "non-decaying" in flat.flags


def lorentz(x, x0, w=20e6):
    return 1.0 / (1 + ((x - x0) / (w / 2)) ** 2)


def test_two_peaks_split_by_3d_splitting():
    x = 0.5e9 + 1e6 * np.arange(5501)
    y = lorentz(x, 3.0e9) + 0.6 * lorentz(x, 5.2095e9)
    ps = find_peaks(x, y, min_prominence=0.1)
    assert len(ps) == 2
    assert ps.centers[1] - ps.centers[0] == pytest.approx(2.2095e9, abs=2e6)
    assert np.all(np.diff(ps.centers) > 0)


def test_flat_noise_has_no_peaks():
    rng = np.random.default_rng(0)
    x = np.arange(1000.0)
    assert len(find_peaks(x, 1 + rng.normal(0, 0.01, 1000), min_prominence=0.2)) == 0


def test_single_peak_within_one_step():
    x = np.arange(0, 200.0)
    ps = find_peaks(x, lorentz(x, 87.3, 12.0), min_prominence=0.5)
    assert len(ps) == 1 and abs(ps.centers[0] - 87.3) <= 1.0


def test_peak_centers_unbiased_over_noise():
    rng = np.random.default_rng(5)
    x = np.arange(0, 300.0)
    truth = 150.3
    errs = [find_peaks(x, lorentz(x, truth, 30.0) + rng.normal(0, 0.02, x.size),
                       min_prominence=0.5).strongest(1).centers[0] - truth for _ in range(100)]
    assert abs(np.mean(errs)) < 0.5


def test_peak_grid_must_be_uniform():
    with pytest.raises(ConstraintViolation):
        find_peaks([0, 1, 3, 4], [0, 1, 0, 0])


def test_parity_examples():
    assert parity([(0, 0), (1, 1)]) == 1.0
    assert parity([(0, 1), (1, 0)]) == -1.0
    rng = np.random.default_rng(1)
    pairs = rng.integers(0, 2, (40_000, 2))
    assert abs(parity(pairs)) < 3 / math.sqrt(40_000)
    with pytest.raises(InsufficientDataError):
        parity([])


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=50))
def test_parity_invariant_under_relabeling(pairs):
    flipped = [(1 - a, 1 - b) for a, b in pairs]
    assert parity(flipped) == parity(pairs)
    assert -1 <= parity(pairs) <= 1
