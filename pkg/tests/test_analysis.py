import csv
import math
from dataclasses import replace

import numpy as np
import pytest

from mcwind.analysis import (
    CoherenceEstimate,
    coherence_report,
    estimate_coherence,
    nmse,
    pair_error,
)
from mcwind.corcos import CorcosParams, coherence_matrices, coherence_pair
from mcwind.dsp import MultichannelBuffer, WindowSpec, num_frames
from mcwind.errors import ArgumentError
from mcwind.multichannel import SimulationConfig, generate

CROSSWIND = CorcosParams(0.004, 1.8, math.pi / 2)
DOWNWIND = CorcosParams(0.020, 2.8, 0.0)
WIN = WindowSpec.hann(2048)


def model_estimate(params, gamma=None):
    """An estimate holding ``gamma`` (default: the model itself) in every pair."""
    g = coherence_matrices(params).transpose(1, 2, 0) if gamma is None else gamma
    return CoherenceEstimate(np.array(g), 100, WIN, params.fft_length, params.sample_rate_hz)


class TestEstimator:
    def test_identical_channels(self, rng):
        x = rng.standard_normal(40_000)
        est = estimate_coherence(MultichannelBuffer(np.stack([x, x]), 16000.0), WIN)
        np.testing.assert_allclose(est.gamma_hat[0, 1], 1.0, atol=1e-12)

    def test_negated_channel(self, rng):
        x = rng.standard_normal(40_000)
        est = estimate_coherence(MultichannelBuffer(np.stack([x, -x]), 16000.0), WIN)
        np.testing.assert_allclose(est.gamma_hat[0, 1], -1.0, atol=1e-12)

    def test_invariants(self, rng):
        x = rng.standard_normal((3, 30_000))
        x[1] += 0.5 * x[0]
        g = estimate_coherence(MultichannelBuffer(x, 16000.0), WIN).gamma_hat
        assert np.all(np.abs(g) <= 1 + 1e-9)
        np.testing.assert_array_equal(np.diagonal(g, axis1=0, axis2=1), 1.0)
        np.testing.assert_allclose(g, np.conj(np.swapaxes(g, 0, 1)), atol=1e-15)

    def test_frame_count(self, rng):
        est = estimate_coherence(MultichannelBuffer(rng.standard_normal((2, 50_000)), 16000.0), WIN)
        assert est.num_frames_averaged == num_frames(50_000, WIN)
        assert est.gamma_hat.shape == (2, 2, 1025)

    def test_independent_noise_bias(self):
        gen = np.random.default_rng(600)
        x = gen.standard_normal((2, 600 * 16000))
        est = estimate_coherence(MultichannelBuffer(x, 16000.0), WIN)
        L = est.num_frames_averaged
        assert np.mean(np.abs(est.gamma_hat[0, 1])) <= 2 / math.sqrt(L)

    def test_too_few_frames(self, rng):
        with pytest.raises(ArgumentError):
            estimate_coherence(MultichannelBuffer(rng.standard_normal((2, 4000)), 16000.0), WIN)

    def test_silent_channel_is_undefined(self, rng):
        x = np.stack([rng.standard_normal(20_000), np.zeros(20_000)])
        g = estimate_coherence(MultichannelBuffer(x, 16000.0), WIN).gamma_hat
        assert np.all(np.isnan(g[0, 1])) and np.all(np.isnan(g[1, 1]))
        assert np.all(g[0, 0] == 1.0)

    def test_deterministic(self, rng):
        buf = MultichannelBuffer(rng.standard_normal((2, 30_000)), 16000.0)
        a = estimate_coherence(buf, WIN).gamma_hat
        np.testing.assert_array_equal(a, estimate_coherence(buf, WIN).gamma_hat)
        np.testing.assert_allclose(a, estimate_coherence(buf, WIN, block_frames=3).gamma_hat, atol=1e-13)


class TestNmse:
    @pytest.mark.parametrize("params", [CROSSWIND, DOWNWIND])
    def test_model_against_itself(self, params):
        assert nmse(model_estimate(params), params) <= 1e-12
        assert nmse(model_estimate(params), params, band_limit_hz=1000) <= 1e-12

    @pytest.mark.parametrize("params", [CROSSWIND, DOWNWIND])
    def test_zero_estimate(self, params):
        zero = model_estimate(params, np.zeros((2, 2, params.num_bins), complex))
        assert abs(nmse(zero, params) - 1.0) <= 1e-12
        assert abs(nmse(zero, params, band_limit_hz=500) - 1.0) <= 1e-12

    @pytest.mark.parametrize("delta", [0.01, -0.2, 0.5])
    def test_constant_offset_closed_form(self, delta):
        p = DOWNWIND
        g = coherence_matrices(p).transpose(1, 2, 0) + delta
        k = np.arange(p.fft_length // 2)
        model = coherence_pair(p, k, 1, False)
        expected = delta**2 * (p.fft_length / 2) / np.sum(np.abs(model) ** 2)
        direct = np.sum(np.abs(g[0, 1, k] - model) ** 2) / np.sum(np.abs(model) ** 2)
        got = nmse(model_estimate(p, g), p)
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(direct, rel=1e-12)

    def test_nyquist_excluded(self):
        p = DOWNWIND
        g = coherence_matrices(p).transpose(1, 2, 0).copy()
        g[0, 1, -1] = 5.0
        assert nmse(model_estimate(p, g), p) <= 1e-12

    def test_band_limit_bins(self):
        err = pair_error(model_estimate(CROSSWIND), CROSSWIND, band_limit_hz=1000)
        assert err.bins_used == 129 and err.bins_missing == 0

    def test_undefined_bins_excluded(self):
        p = DOWNWIND
        g = coherence_matrices(p).transpose(1, 2, 0).copy()
        g[0, 1, 10:20] = np.nan
        err = pair_error(model_estimate(p, g), p)
        assert err.bins_missing == 10 and err.nmse <= 1e-12

    def test_grid_mismatch(self):
        with pytest.raises(ArgumentError):
            nmse(model_estimate(CROSSWIND), replace(CROSSWIND, fft_length=1024))
        with pytest.raises(ArgumentError):
            nmse(model_estimate(CROSSWIND), replace(CROSSWIND, sample_rate_hz=8000.0))

    def test_pair_range(self):
        with pytest.raises(ArgumentError):
            nmse(model_estimate(CROSSWIND), CROSSWIND, pair=(0, 2))


class TestReport:
    def test_rows(self):
        rep = coherence_report(model_estimate(CROSSWIND), CROSSWIND, 1000)
        assert len(rep.rows) == 129
        assert {(r[0], r[1]) for r in rep.rows} == {(1, 2)}
        first = rep.rows[0]
        assert first[2] == 0.0 and (first[5], first[6]) == (1.0, 0.0)
        assert rep.rows[-1][2] == 1000.0

    def test_model_columns_match_model(self):
        p = replace(DOWNWIND, num_channels=3)
        rep = coherence_report(model_estimate(p), p, 500)
        for mic_i, mic_j, f, _, _, re_m, im_m in rep.rows:
            k = int(round(f * p.fft_length / p.sample_rate_hz))
            assert complex(re_m, im_m) == coherence_pair(p, k, mic_j - mic_i, False)
        assert {(s.i, s.j) for s in rep.summary} == {(0, 1), (0, 2), (1, 2)}

    def test_csv(self, tmp_path):
        p = CROSSWIND
        g = coherence_matrices(p).transpose(1, 2, 0).copy()
        g[0, 1, 3] = np.nan
        rep = coherence_report(model_estimate(p, g), p, 1000)
        curves, summary = rep.write_csv(tmp_path / "out.csv")
        assert summary.name == "out_nmse.csv"
        rows = list(csv.reader(open(curves, encoding="utf-8")))
        assert rows[0] == ["mic_i", "mic_j", "frequency_hz", "re_estimate", "im_estimate",
                           "re_model", "im_model"]
        assert len(rows) == 130
        assert rows[4][3] == "" and rows[4][5] != ""
        assert float(rows[2][2]) == pytest.approx(7.8125)
        srows = list(csv.reader(open(summary, encoding="utf-8")))
        assert srows[0] == ["mic_i", "mic_j", "nmse", "bins_used", "bins_missing"]
        assert srows[1][:2] == ["1", "2"] and srows[1][4] == "1"


@pytest.mark.slow
class TestStatistics:
    @pytest.fixture(scope="class")
    @classmethod
    def runs(cls):
        def est(seed, duration):
            out = generate(SimulationConfig(CROSSWIND, duration_s=duration, master_seed=seed))
            return out, estimate_coherence(out, WIN)
        return {key: est(*key) for key in [(1, 60.0), (1, 600.0), (2, 300.0), (3, 300.0)]}

    def test_longer_analysis_is_closer(self, runs):
        short = nmse(runs[1, 60.0][1], CROSSWIND, band_limit_hz=1000)
        long = nmse(runs[1, 600.0][1], CROSSWIND, band_limit_hz=1000)
        assert long < short

    def test_independent_runs_agree(self):
        # E[between] = E[single_a] + E[single_b] - 2 bias^2, so the bound is tight for an
        # unbiased estimator; test it one-sided at three standard errors over disjoint pairs
        k = np.arange(129)
        den = np.sum(np.abs(coherence_pair(CROSSWIND, k, 1, False)) ** 2)
        excess = []
        for pair in range(10):
            a, b = (estimate_coherence(generate(SimulationConfig(CROSSWIND, duration_s=60.0,
                                                                 master_seed=100 + 2 * pair + j)), WIN)
                    for j in (0, 1))
            between = np.sum(np.abs(a.gamma_hat[0, 1, k] - b.gamma_hat[0, 1, k]) ** 2) / den
            single = nmse(a, CROSSWIND, band_limit_hz=1000) + nmse(b, CROSSWIND, band_limit_hz=1000)
            excess.append(between - single)
        excess = np.array(excess)
        assert excess.mean() <= 3 * excess.std(ddof=1) / math.sqrt(excess.size)

    def test_concatenated_runs(self, runs):
        x = np.concatenate([runs[2, 300.0][0].channels, runs[3, 300.0][0].channels], axis=1)
        est = estimate_coherence(MultichannelBuffer(x, 16000.0), WIN)
        assert nmse(est, CROSSWIND, band_limit_hz=1000) <= 0.05
