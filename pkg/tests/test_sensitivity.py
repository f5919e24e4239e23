import math

import numpy as np
import pytest

from leafkit.errors import SnapshotError, SpecError, SupportError
from leafkit.filterbank import GaborFilterbank
from leafkit.sensitivity import (
    FilterPmf,
    filter_pmf,
    jsd,
    kl_divergence,
    summarize,
    summary_to_csv,
    trajectory,
    trajectory_from_csv,
    trajectory_to_csv,
)


def _random_pmf(rng, bins=16):
    v = rng.random(bins) + 1e-6
    return FilterPmf(v / v.sum())


def test_filter_pmf_normalized():
    for sigma in (3.0, 15.0, 39.0):
        pmf = filter_pmf(0.3, sigma, 1024)
        assert abs(float(pmf.probs.sum()) - 1.0) <= 1e-9
        assert np.all(pmf.probs >= 0.0)


def test_filter_pmf_peak_bin():
    eta = (200 + 0.5) / 1024  # dead centre of bin 200
    pmf = filter_pmf(eta, 39.0, 1024)  # narrow response
    assert int(np.argmax(pmf.probs)) == 200


def test_filter_pmf_deterministic():
    a = filter_pmf(0.42, 17.0, 512)
    b = filter_pmf(0.42, 17.0, 512)
    np.testing.assert_array_equal(a.probs, b.probs)


def test_filter_pmf_validates_bins():
    with pytest.raises(SpecError):
        filter_pmf(0.5, 10.0, 32)


def test_kl_identical_is_zero():
    p = _random_pmf(np.random.default_rng(0))
    assert kl_divergence(p, p) == 0.0


def test_kl_hand_value_one_bit():
    a = FilterPmf(np.array([1.0, 0.0]))
    b = FilterPmf(np.array([0.5, 0.5]))
    assert kl_divergence(a, b) == pytest.approx(1.0, abs=1e-12)


def test_kl_nonnegative_on_random_pairs():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        assert kl_divergence(_random_pmf(rng), _random_pmf(rng)) >= -1e-12


def test_kl_support_error():
    with pytest.raises(SupportError):
        kl_divergence(FilterPmf(np.array([1.0, 0.0])), FilterPmf(np.array([0.0, 1.0])))


def test_kl_grid_mismatch():
    with pytest.raises(SpecError):
        kl_divergence(FilterPmf(np.full(8, 0.125)), FilterPmf(np.full(16, 0.0625)))


def test_jsd_identity():
    p = _random_pmf(np.random.default_rng(2))
    assert jsd(p, p) == 0.0


def test_jsd_disjoint_supports():
    assert jsd(FilterPmf(np.array([1.0, 0.0])), FilterPmf(np.array([0.0, 1.0]))) == 1.0


def test_jsd_hand_derived_value():
    # KL(P||M) = 0.20752, KL(Q||M) = 0.41504 bits; sqrt of the mean
    p = FilterPmf(np.array([0.5, 0.5]))
    q = FilterPmf(np.array([1.0, 0.0]))
    kl_p = 0.5 * math.log2(0.5 / 0.75) + 0.5 * math.log2(0.5 / 0.25)
    kl_q = math.log2(1.0 / 0.75)
    expected = math.sqrt(0.5 * (kl_p + kl_q))
    assert jsd(p, q) == pytest.approx(expected, abs=1e-12)
    assert jsd(p, q) == pytest.approx(0.5579, abs=1e-3)


def test_jsd_metric_axioms():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        p, q, r = (_random_pmf(rng) for _ in range(3))
        d_pq = jsd(p, q)
        assert 0.0 <= d_pq <= 1.0
        assert abs(d_pq - jsd(q, p)) <= 1e-12
        assert jsd(p, r) <= d_pq + jsd(q, r) + 1e-9


def test_jsd_subnormal_tails():
    # narrow, distant filters: tail probabilities underflow but jsd stays defined
    assert jsd(filter_pmf(0.1, 39.8, 1024), filter_pmf(0.9, 39.8, 1024)) == pytest.approx(1.0)


def test_grid_resolution_stability():
    # doubling bins changes jsd by < 1e-3 when sigma_f spans >= 4 bins at B=512
    rng = np.random.default_rng(4)
    for _ in range(30):
        sigma = rng.uniform(2.0, 39.0)  # sigma_f = 1/(pi*sigma) >= 4/512
        eta_a, eta_b = rng.uniform(0.1, 0.9, 2)
        d512 = jsd(filter_pmf(eta_a, sigma, 512), filter_pmf(eta_b, sigma, 512))
        d1024 = jsd(filter_pmf(eta_a, sigma, 1024), filter_pmf(eta_b, sigma, 1024))
        assert abs(d512 - d1024) < 1e-3


def _bank(eta, sigma):
    return GaborFilterbank(np.asarray(eta, dtype=float), np.asarray(sigma, dtype=float), 401)


def test_trajectory_single_snapshot():
    traj = trajectory([_bank([0.2, 0.6], [10.0, 10.0])], bins=256)
    assert traj.distances.shape == (1, 2)
    np.testing.assert_array_equal(traj.distances, 0.0)


def test_trajectory_fixed_run_all_zero():
    bank = _bank([0.2, 0.5, 0.8], [12.0, 12.0, 12.0])
    traj = trajectory([bank, bank, bank], bins=256)
    np.testing.assert_array_equal(traj.distances, 0.0)
    np.testing.assert_array_equal(traj.mean_per_epoch, 0.0)


def test_trajectory_hand_moved_filter():
    sigma = 20.0
    sigma_f = 1.0 / (math.pi * sigma)
    start = _bank([0.3, 0.6], [sigma, sigma])
    moved = _bank([0.3, 0.6 + 2.0 * sigma_f], [sigma, sigma])
    traj = trajectory([start, moved], bins=1024)
    assert traj.distances[1, 0] == 0.0
    assert traj.distances[1, 1] > 0.5
    assert traj.distances[0].sum() == 0.0


def test_trajectory_validates_filter_counts():
    with pytest.raises(SnapshotError):
        trajectory([_bank([0.2], [10.0]), _bank([0.2, 0.4], [10.0, 10.0])])
    with pytest.raises(SnapshotError):
        trajectory([])


def test_summarize():
    bank0 = _bank([0.2, 0.6], [15.0, 15.0])
    bank1 = _bank([0.21, 0.7], [15.0, 15.0])
    traj = trajectory([bank0, bank1], bins=512)
    summary = summarize(traj)
    assert summary["max_moving_filter"] == 1
    assert summary["final_mean"] == pytest.approx(float(traj.distances[-1].mean()))


def test_trajectory_csv_roundtrip():
    bank0 = _bank([0.2, 0.6], [15.0, 15.0])
    bank1 = _bank([0.25, 0.6], [14.0, 15.0])
    traj = trajectory([bank0, bank1], bins=512)
    back = trajectory_from_csv(trajectory_to_csv(traj))
    np.testing.assert_array_equal(back.distances, traj.distances)
    text = summary_to_csv(traj)
    assert text.startswith("# mean_final_jsd = ")
    assert "filter_index,final_jsd" in text
