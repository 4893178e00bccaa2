import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal, stats

from mcwind.dsp import RngStream
from mcwind.errors import ArgumentError, ConfigurationError
from mcwind.single_channel import (
    ExcitationCodebook,
    GainModel,
    MarkovGainModel,
    WeibullParams,
    ar_psd,
    channel_streams,
    default_ar_coefficients,
    fit_ar_to_psd,
    generate_excitation,
    generate_single_channel,
    hann_kernel,
    levinson_durbin,
    odd_length,
    simulate_long_term_gain,
    simulate_short_term_gain,
    smooth_gain,
    weibull_inverse_cdf,
    wind_target_psd,
)

FS = 16000.0
ENVELOPE_FRAME = 1600  # 100 ms


def envelope(x, frame=ENVELOPE_FRAME):
    n = x.shape[-1] // frame * frame
    return np.sqrt(np.mean(x[..., :n].reshape(*x.shape[:-1], -1, frame) ** 2, axis=-1))


@pytest.fixture(scope="module")
def codebook():
    return ExcitationCodebook.synthetic()


@pytest.fixture(scope="module")
def default_minute(codebook):
    gm = GainModel()
    lt = simulate_long_term_gain(gm.markov, 6000, RngStream(11, 0))
    y = generate_single_channel(gm, codebook, default_ar_coefficients(), 60.0, FS, 11, shared_long_term=lt)
    return y, lt, gm


class TestMarkov:
    def test_identity_chain_stays(self):
        m = MarkovGainModel(transition_matrix=np.eye(3), initial_state=2)
        gains, states = simulate_long_term_gain(m, 500, RngStream(0))
        assert np.all(states == 2)
        assert np.all(gains == 1.0)

    def test_uniform_chain_frequencies(self):
        m = MarkovGainModel(transition_matrix=np.full((3, 3), 1 / 3))
        _, states = simulate_long_term_gain(m, 100_000, RngStream(5))
        np.testing.assert_allclose(np.bincount(states, minlength=3) / 1e5, 1 / 3, atol=0.02)

    def test_transitions_follow_matrix(self):
        P = np.array([[0.9, 0.1, 0.0], [0.0, 0.5, 0.5], [0.2, 0.0, 0.8]])
        _, s = simulate_long_term_gain(MarkovGainModel(transition_matrix=P), 200_000, RngStream(8))
        counts = np.zeros((3, 3))
        np.add.at(counts, (s[:-1], s[1:]), 1)
        np.testing.assert_allclose(counts / counts.sum(axis=1, keepdims=True), P, atol=0.01)

    def test_silent_state(self, codebook):
        m = MarkovGainModel(transition_matrix=np.eye(3), initial_state=0)
        gm = GainModel(markov=m)
        y = generate_single_channel(gm, codebook, default_ar_coefficients(), 1.0, FS, 3)
        assert not np.any(y)

    @pytest.mark.parametrize("kwargs", [
        dict(transition_matrix=np.full((3, 3), 0.3)),
        dict(transition_matrix=-np.eye(3) + np.full((3, 3), 2 / 3)),
        dict(state_gains=np.array([0.0, 1.0, 0.5])),
        dict(state_gains=np.array([-0.1, 0.3, 1.0])),
        dict(initial_state=3),
        dict(frame_len_samples=0),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            MarkovGainModel(**kwargs)

    def test_deterministic(self):
        m = MarkovGainModel()
        a = simulate_long_term_gain(m, 1000, RngStream(3))[1]
        np.testing.assert_array_equal(a, simulate_long_term_gain(m, 1000, RngStream(3))[1])


class TestWeibull:
    def test_shape_one_is_exponential(self):
        g = simulate_short_term_gain(WeibullParams(1.0, 2.5), 1_000_000, RngStream(1, 3))
        assert np.mean(g**2) == pytest.approx(2.5, rel=0.02)

    @pytest.mark.parametrize("shape,scale", [(1.5, 1.0), (0.7, 3.0), (4.0, 0.2)])
    def test_mean_energy(self, shape, scale):
        p = WeibullParams(shape, scale)
        g = simulate_short_term_gain(p, 1_000_000, RngStream(2, 3))
        expected = scale * math.gamma(1 + 1 / shape)
        assert p.mean_energy == pytest.approx(expected)
        assert np.mean(g**2) == pytest.approx(expected, rel=0.02)

    def test_distribution(self):
        g = simulate_short_term_gain(WeibullParams(1.5, 1.0), 20_000, RngStream(4, 3))
        assert stats.kstest(g**2, stats.weibull_min(1.5, scale=1.0).cdf).pvalue > 1e-3

    @given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True),
           st.floats(0.2, 5), st.floats(0.1, 10))
    def test_inverse_cdf_monotone(self, u1, u2, shape, scale):
        lo, hi = sorted((u1, u2))
        assert weibull_inverse_cdf(lo, shape, scale) <= weibull_inverse_cdf(hi, shape, scale)

    def test_inverse_cdf_at_zero(self):
        assert weibull_inverse_cdf(0.0, 1.5, 1.0) == 0.0

    @pytest.mark.parametrize("args", [(0.0, 1.0), (1.0, -1.0), (math.nan, 1.0)])
    def test_invalid(self, args):
        with pytest.raises(ConfigurationError):
            WeibullParams(*args)


class TestSmoothing:
    def test_constant(self):
        np.testing.assert_allclose(smooth_gain(np.full(30, 0.7), 160, 481), 0.7, rtol=1e-13)

    def test_step_monotone(self):
        out = smooth_gain(np.r_[np.zeros(20), np.ones(20)], 10, 51)
        assert np.all(np.diff(out) >= -1e-15)
        ramp = np.flatnonzero((out > 1e-12) & (out < 1 - 1e-12))
        assert ramp.size == 50
        assert out[0] == 0.0 and out[-1] == 1.0

    @pytest.mark.parametrize("smooth_len", [1, 31, 481, 8001])
    def test_direct_convolution_oracle(self, smooth_len, rng):
        g = rng.random(120)
        out = smooth_gain(g, 160, smooth_len)
        held = np.repeat(g, 160)
        half = smooth_len // 2
        padded = np.r_[np.full(half, held[0]), held, np.full(half, held[-1])]
        h = hann_kernel(smooth_len)
        idx = np.arange(0, held.size, 97)
        direct = np.array([padded[n:n + smooth_len] @ h[::-1] for n in idx])
        np.testing.assert_allclose(out[idx], direct, rtol=0, atol=1e-12)
        assert out.size == 120 * 160

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(0, 10), min_size=1, max_size=60), st.sampled_from([1, 3, 31, 81]))
    def test_bounded_by_input(self, track, smooth_len):
        out = smooth_gain(track, 8, smooth_len)
        assert out.min() >= min(track) and out.max() <= max(track)

    def test_kernel(self):
        h = hann_kernel(481)
        assert h.sum() == pytest.approx(1.0)
        assert h[0] > 0 and np.allclose(h, h[::-1])

    @pytest.mark.parametrize("n", [0, 2, 480])
    def test_even_or_empty_length(self, n):
        with pytest.raises(ArgumentError):
            smooth_gain(np.ones(3), 10, n)

    def test_odd_length(self):
        assert odd_length(0.5, FS) == 8001
        assert odd_length(0.03, FS) == 481
        assert odd_length(0.0001, 1000) == 1

    def test_gain_model_defaults(self):
        gm = GainModel()
        assert (gm.longterm_smooth_len, gm.shortterm_smooth_len) == (8001, 481)
        with pytest.raises(ConfigurationError):
            GainModel(longterm_smooth_len=31, shortterm_smooth_len=481)
        with pytest.raises(ConfigurationError):
            GainModel(longterm_smooth_len=8000)


class TestExcitation:
    def test_gaussian_only(self, codebook):
        cb = ExcitationCodebook(codebook.entries, 0.0)
        e = generate_excitation(cb, 200_000, RngStream(1, 1), RngStream(1, 2))
        assert abs(stats.skew(e)) < 0.03
        assert abs(stats.kurtosis(e)) < 0.06
        assert stats.jarque_bera(e).pvalue > 1e-3

    def test_codebook_only(self, codebook):
        cb = ExcitationCodebook(codebook.entries, 1.0)
        e = generate_excitation(cb, 4096, RngStream(1, 1), RngStream(1, 2))
        best = 0.0
        for entry in cb.entries:
            xc = np.fft.ifft(np.fft.fft(e) * np.conj(np.fft.fft(entry))).real / 4096
            best = max(best, xc.max())
        assert best == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("beta", [0.0, 0.3, 0.5, 1.0])
    def test_unit_rms(self, codebook, beta):
        cb = ExcitationCodebook(codebook.entries, beta)
        e = generate_excitation(cb, 50_001, RngStream(2, 1), RngStream(2, 2))
        assert np.sqrt(np.mean(e**2)) == pytest.approx(1.0, abs=1e-9)

    def test_empty_codebook(self):
        with pytest.raises(ConfigurationError):
            ExcitationCodebook([], 0.5)
        ExcitationCodebook([], 0.0)

    def test_entries_unit_rms(self):
        cb = ExcitationCodebook([np.arange(1.0, 10.0), [3.0, -3.0]])
        for e in cb.entries:
            assert np.sqrt(np.mean(e**2)) == pytest.approx(1.0)

    def test_silent_entry(self):
        with pytest.raises(ConfigurationError):
            ExcitationCodebook([np.zeros(10)])

    def test_channels_with_shared_codebook_uncorrelated(self, codebook):
        cb = ExcitationCodebook(codebook.entries, 1.0)
        a = generate_excitation(cb, 500_000, *channel_streams(9, 0)[:2])
        b = generate_excitation(cb, 500_000, *channel_streams(9, 1)[:2])
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.02

    def test_from_directory(self, tmp_path):
        from scipy.io import wavfile

        for i in range(3):
            wavfile.write(tmp_path / f"s{i}.wav", 16000, np.random.default_rng(i).standard_normal(500).astype(np.float32))
        cb = ExcitationCodebook.from_directory(tmp_path, 0.4)
        assert len(cb.entries) == 3 and cb.mix_weight == 0.4
        with pytest.raises(ConfigurationError):
            ExcitationCodebook.from_directory(tmp_path / "missing")


class TestAutoregressive:
    def test_levinson_recovers_ar_process(self):
        a = np.array([1.0, -0.9, 0.5])
        # autocorrelation of 1/A(z) driven by unit white noise
        _, h = signal.freqz([1.0], a, worN=8192, whole=True)
        r = np.fft.ifft(np.abs(h) ** 2).real
        est, err = levinson_durbin(r[:3], 2)
        np.testing.assert_allclose(est, a, atol=1e-10)
        assert err == pytest.approx(1.0, rel=1e-8)

    def test_levinson_matches_yule_walker(self, rng):
        from scipy.linalg import solve_toeplitz

        x = signal.lfilter([1], [1, -0.5, 0.2], rng.standard_normal(5000))
        r = np.correlate(x, x, "full")[x.size - 1:x.size + 5] / x.size
        a, _ = levinson_durbin(r, 5)
        np.testing.assert_allclose(a[1:], -solve_toeplitz(r[:5], r[1:6]), rtol=1e-9, atol=1e-12)

    def test_levinson_needs_lags(self):
        with pytest.raises(ArgumentError):
            levinson_durbin([1.0, 0.5], 3)

    def test_default_fit_within_3db(self):
        a = default_ar_coefficients(FS)
        assert a.size == 5
        freqs = np.linspace(50, 1000, 400)
        _, gain = fit_ar_to_psd(wind_target_psd(np.fft.rfftfreq(2**16, 1 / FS)), FS)
        err_db = 10 * np.log10(ar_psd(a, freqs, FS, gain) / wind_target_psd(freqs))
        assert np.max(np.abs(err_db)) <= 3.0

    def test_default_stable(self):
        assert np.max(np.abs(np.roots(np.r_[1.0, default_ar_coefficients()]))) < 1.0

    def test_target_shape(self):
        assert wind_target_psd(10.0) == 1.0
        assert 10 * np.log10(wind_target_psd(200.0) / wind_target_psd(100.0)) == pytest.approx(-18.0)

    def test_zero_coefficients_give_modulated_excitation(self, codebook):
        gm = GainModel()
        y = generate_single_channel(gm, codebook, np.zeros(5), 2.0, FS, 4)
        n = y.size
        noise, choice, st_rng = channel_streams(4, 0)
        lt, _ = simulate_long_term_gain(gm.markov, 200, RngStream(4, 0))
        stg = simulate_short_term_gain(gm.weibull, 200, st_rng)
        ref = generate_excitation(codebook, n, noise, choice)
        ref = ref * smooth_gain(lt, 160, 8001) * smooth_gain(stg, 160, 481)
        np.testing.assert_array_equal(y, ref)


class TestSingleChannel:
    def test_length_and_determinism(self, codebook):
        gm, a = GainModel(), default_ar_coefficients()
        y1 = generate_single_channel(gm, codebook, a, 1.2345, FS, 77)
        y2 = generate_single_channel(gm, codebook, a, 1.2345, FS, 77)
        assert y1.size == round(1.2345 * FS)
        np.testing.assert_array_equal(y1, y2)

    def test_spectral_concentration(self, default_minute):
        y = default_minute[0]
        f, p = signal.welch(y, FS, nperseg=4096)
        assert p[f < 1000].sum() / p.sum() >= 0.99

    def test_low_pass(self, default_minute):
        f, p = signal.welch(default_minute[0], FS, nperseg=4096)
        low = p[f <= 250].mean()
        high = p[(f >= 750) & (f <= 1000)].mean()
        assert 10 * np.log10(low / high) >= 20.0

    def test_envelope_tracks_long_term_gain(self, default_minute):
        y, (lt, _), gm = default_minute
        g = smooth_gain(lt, 160, gm.longterm_smooth_len)[: y.size]
        n = y.size // ENVELOPE_FRAME * ENVELOPE_FRAME
        g_frame = g[:n].reshape(-1, ENVELOPE_FRAME).mean(axis=1)
        assert np.corrcoef(envelope(y), g_frame)[0, 1] > 0.8

    def test_shared_track_frame_mismatch(self, codebook):
        with pytest.raises(ArgumentError):
            generate_single_channel(GainModel(), codebook, np.zeros(5), 1.0, FS, 0,
                                    shared_long_term=(np.ones(10), np.ones(10, int)))

    def test_unstable_ar_rejected(self, codebook):
        with pytest.raises(ConfigurationError):
            generate_single_channel(GainModel(), codebook, [-2.0, 1.5], 1.0, FS, 0)
