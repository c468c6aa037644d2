import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from fransonsim.correlator import (CorrelationHistogram, autocorrelate,
                                   chsh_counts, coincidences_at,
                                   cross_correlate, cross_correlate_naive,
                                   normalize_g2)


def poisson_tags(rate_per_ps, duration_ps, seed):
    rng = np.random.default_rng(seed)
    n = rng.poisson(rate_per_ps * duration_ps)
    return np.sort(rng.integers(0, duration_ps, size=n, dtype=np.int64))


sorted_tag_lists = st.lists(st.integers(0, 50_000), min_size=0,
                            max_size=120).map(sorted)


class TestExactness:
    def test_single_pair_lands_in_right_bin(self):
        x = np.array([1_000_000], dtype=np.int64)
        y = np.array([1_001_070], dtype=np.int64)
        h = cross_correlate(x, y, bin_width_ps=10, max_lag_ps=2000)
        assert h.counts.sum() == 1
        assert h.lags_ps[np.argmax(h.counts)] == 1070

    def test_matches_naive_reference(self):
        x = poisson_tags(2e-4, 200_000, 0)
        y = poisson_tags(2e-4, 200_000, 1)
        fast = cross_correlate(x, y, 37, 37 * 20)
        slow = cross_correlate_naive(x, y, 37, 37 * 20)
        assert np.array_equal(fast.counts, slow.counts)
        auto_f = autocorrelate(x, 37, 37 * 20)
        auto_s = cross_correlate_naive(x, x, 37, 37 * 20, exclude_self=True)
        assert np.array_equal(auto_f.counts, auto_s.counts)

    @settings(max_examples=40, deadline=None)
    @given(sorted_tag_lists, sorted_tag_lists,
           st.integers(1, 97), st.integers(1, 12))
    def test_matches_naive_property(self, xs, ys, bw, n_bins):
        x = np.array(xs, dtype=np.int64)
        y = np.array(ys, dtype=np.int64)
        fast = cross_correlate(x, y, bw, bw * n_bins)
        slow = cross_correlate_naive(x, y, bw, bw * n_bins)
        assert np.array_equal(fast.counts, slow.counts)

    def test_swap_symmetry(self):
        x = poisson_tags(1e-4, 300_000, 2)
        y = poisson_tags(1e-4, 300_000, 3)
        h_xy = cross_correlate(x, y, 50, 1000)
        h_yx = cross_correlate(y, x, 50, 1000)
        assert np.array_equal(h_xy.counts, h_yx.counts[::-1])

    def test_time_shift_invariance(self):
        x = poisson_tags(1e-4, 300_000, 4)
        y = poisson_tags(1e-4, 300_000, 5)
        h0 = cross_correlate(x, y, 50, 1000)
        h1 = cross_correlate(x + 777_777, y + 777_777, 50, 1000)
        assert np.array_equal(h0.counts, h1.counts)

    def test_chunking_invariance(self):
        x = poisson_tags(2e-4, 200_000, 6)
        y = poisson_tags(2e-4, 200_000, 7)
        ref = cross_correlate(x, y, 10, 500)
        for cs in (1, 7, 64, 10 ** 6):
            assert np.array_equal(
                ref.counts, cross_correlate(x, y, 10, 500,
                                            chunk_size=cs).counts)
        auto_ref = autocorrelate(x, 10, 500)
        assert np.array_equal(auto_ref.counts,
                              autocorrelate(x, 10, 500, chunk_size=13).counts)

    def test_zero_lag_self_pairs_excluded(self):
        x = np.array([100, 200, 300], dtype=np.int64)
        h = autocorrelate(x, 10, 100)
        center = h.counts[len(h.counts) // 2]
        assert center == 0
        assert h.counts[-1] == 2  # the two +100 ps neighbor pairs

    def test_comb_autocorrelation(self):
        x = np.arange(0, 1_000_000, 1000, dtype=np.int64)
        h = autocorrelate(x, 100, 3000)
        by_lag = dict(zip(h.lags_ps.tolist(), h.counts.tolist()))
        n = x.size
        for k in (1, 2, 3):
            assert by_lag[1000 * k] == n - k
            assert by_lag[-1000 * k] == n - k
        assert by_lag[500] == 0


class TestStatistics:
    def test_flat_for_independent_poisson(self):
        dur = 5_000_000
        x = poisson_tags(1e-3, dur, 10)
        y = poisson_tags(1e-3, dur, 11)
        h = normalize_g2(cross_correlate(x, y, 100, 5000), duration_ps=dur)
        expected = h.normalization["rates"]["expected_per_bin"]
        chi2 = float(np.sum((h.counts.astype(float) - expected) ** 2
                            / expected))
        p = sps.chi2.sf(chi2, df=len(h.counts))
        assert p > 1e-3
        sigma = 1.0 / np.sqrt(expected)
        assert np.allclose(h.g2, 1.0, atol=5 * sigma)
        assert h.g2.mean() == pytest.approx(
            1.0, abs=4 * sigma / np.sqrt(len(h.counts)))

    def test_coincidences_at_matches_histogram(self):
        x = poisson_tags(5e-4, 400_000, 12)
        y = poisson_tags(5e-4, 400_000, 13)
        h = cross_correlate(x, y, 101, 101 * 5)
        for k, lag in enumerate(h.lags_ps):
            assert coincidences_at(x, y, int(lag), 101) == int(h.counts[k])


class TestValidation:
    def test_unsorted_rejected(self):
        bad = np.array([5, 3], dtype=np.int64)
        good = np.array([1, 2], dtype=np.int64)
        with pytest.raises(ValueError):
            cross_correlate(bad, good, 10, 100)

    def test_bad_binning_rejected(self):
        x = np.array([1], dtype=np.int64)
        with pytest.raises(ValueError):
            cross_correlate(x, x, 0, 100)
        with pytest.raises(ValueError):
            cross_correlate(x, x, 30, 100)  # not a multiple
        with pytest.raises(ValueError):
            cross_correlate(x, x, 10, 100, chunk_size=0)
        with pytest.raises(ValueError):
            coincidences_at(x, x, 0, 0)

    def test_normalize_empty_rejected(self):
        empty = np.array([], dtype=np.int64)
        h = cross_correlate(empty, empty, 10, 100)
        with pytest.raises(ValueError):
            normalize_g2(h, duration_ps=1000)
        some = np.array([1, 2], dtype=np.int64)
        with pytest.raises(ValueError):
            normalize_g2(cross_correlate(some, some, 10, 100), duration_ps=0)

    def test_histogram_invariants(self):
        with pytest.raises(ValueError):
            CorrelationHistogram(10, 105, np.zeros(3), np.zeros(3), 0, 0, 0)


class TestOutputs:
    def test_csv(self, tmp_path):
        x = np.array([0, 1070], dtype=np.int64)
        h = cross_correlate(x, x, 10, 2000, exclude_self=True)
        path = tmp_path / "h.csv"
        h.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "lag_ps,count"
        assert len(lines) == 1 + len(h.counts)

    def test_json_roundtrip(self, tmp_path):
        x = poisson_tags(1e-4, 100_000, 14)
        h = normalize_g2(cross_correlate(x, x, 10, 100, exclude_self=True))
        d = h.to_json_dict()
        assert d["counts"] == [int(v) for v in h.counts]
        assert "g2" in d and "rates" in d


class TestChshAssembly:
    def test_counts_built_per_setting(self):
        a = np.array([0, 1070, 2140], dtype=np.int64)
        runs = {(0.0, 0.0): {"A1": a, "A2": a + 5, "B1": a, "B2": a + 600}}
        out = chsh_counts(runs, window_ps=267)
        per = out[(0.0, 0.0)]
        assert per[("A1", "B1")] == 3
        assert per[("A1", "B2")] == 0
        assert per[("A2", "B1")] == 3  # 5 ps offset inside the window
