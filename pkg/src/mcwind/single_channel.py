"""Single-channel wind noise from a source-filter model.

Signal path::

    excitation --* smoothed long-term gain --* smoothed short-term gain --> 1/A(z)

* excitation: unit-RMS mix of white Gaussian noise and codebook snippets
* long-term gain: three-state Markov chain (no wind / low wind / high wind), one
  state per gain frame, each state mapped to a fixed gain
* short-term gain: square root of Weibull-distributed frame energies
* both gain tracks are held constant over a frame and smoothed with unit-area
  Hann kernels of different lengths
* 1/A(z): fixed AR(5) all-pole filter giving the low-pass spectral envelope

All numeric defaults are stand-ins chosen to give plausible wind-like behaviour;
they are not trained values and every one of them can be overridden.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

from . import kernels
from .dsp import RngStream, allpole_filter, gaussian_noise
from .errors import ArgumentError, ConfigurationError

DEFAULT_SAMPLE_RATE = 16000.0
DEFAULT_FRAME_S = 0.010
DEFAULT_LONGTERM_SMOOTH_S = 0.500
DEFAULT_SHORTTERM_SMOOTH_S = 0.030
DEFAULT_STATE_GAINS = (0.0, 0.3, 1.0)
DEFAULT_SELF_TRANSITION = 0.98
DEFAULT_WEIBULL_SHAPE = 1.5
DEFAULT_WEIBULL_SCALE = 1.0
DEFAULT_MIX_WEIGHT = 0.5
AR_ORDER = 5
LONG_TERM_STREAM = 0

# target spectral envelope for the default AR fit
TARGET_CORNER_HZ = 50.0
TARGET_SLOPE_DB_PER_OCTAVE = 18.0
FIT_BAND_HZ = (50.0, 1000.0)


def odd_length(seconds: float, sample_rate: float) -> int:
    """Samples in ``seconds``, rounded to the nearest odd integer >= 1."""
    n = int(round(seconds * sample_rate))
    return max(1, n + 1 if n % 2 == 0 else n)


def default_transition_matrix(self_prob: float = DEFAULT_SELF_TRANSITION) -> np.ndarray:
    off = (1.0 - self_prob) / 2.0
    return np.full((3, 3), off) + np.eye(3) * (self_prob - off)


@dataclass
class MarkovGainModel:
    state_gains: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_STATE_GAINS))
    transition_matrix: np.ndarray = field(default_factory=default_transition_matrix)
    initial_state: int = 1
    frame_len_samples: int = 160

    def __post_init__(self):
        self.state_gains = np.asarray(self.state_gains, dtype=np.float64)
        self.transition_matrix = np.asarray(self.transition_matrix, dtype=np.float64)
        g, P = self.state_gains, self.transition_matrix
        if g.shape != (3,) or P.shape != (3, 3):
            raise ConfigurationError("Markov gain model needs 3 state gains and a 3x3 transition matrix")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(P))):
            raise ConfigurationError("Markov gain model values must be finite")
        if g[0] < 0 or not (g[0] <= g[1] <= g[2]):
            raise ConfigurationError("state gains must satisfy 0 <= no-wind <= low <= high")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise ConfigurationError("transition matrix must be row-stochastic (rows sum to 1)")
        if self.initial_state not in (0, 1, 2):
            raise ConfigurationError(f"initial state must be 0, 1 or 2, got {self.initial_state}")
        if self.frame_len_samples < 1:
            raise ConfigurationError("frame length must be >= 1 sample")


@dataclass
class WeibullParams:
    shape: float = DEFAULT_WEIBULL_SHAPE
    scale: float = DEFAULT_WEIBULL_SCALE
    frame_len_samples: int = 160

    def __post_init__(self):
        for name in ("shape", "scale"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"Weibull {name} must be finite and positive, got {v}")
        if self.frame_len_samples < 1:
            raise ConfigurationError("frame length must be >= 1 sample")

    @property
    def mean_energy(self) -> float:
        return self.scale * math.gamma(1.0 + 1.0 / self.shape)


@dataclass
class GainModel:
    markov: MarkovGainModel = field(default_factory=MarkovGainModel)
    weibull: WeibullParams = field(default_factory=WeibullParams)
    longterm_smooth_len: int = odd_length(DEFAULT_LONGTERM_SMOOTH_S, DEFAULT_SAMPLE_RATE)
    shortterm_smooth_len: int = odd_length(DEFAULT_SHORTTERM_SMOOTH_S, DEFAULT_SAMPLE_RATE)

    def __post_init__(self):
        lt, st = self.longterm_smooth_len, self.shortterm_smooth_len
        if lt < 1 or st < 1:
            raise ConfigurationError("smoothing lengths must be >= 1")
        if lt % 2 == 0 or st % 2 == 0:
            raise ConfigurationError("smoothing lengths must be odd")
        if lt < st:
            raise ConfigurationError("long-term smoothing must not be shorter than short-term smoothing")

    @classmethod
    def for_sample_rate(cls, sample_rate: float, frame_s: float = DEFAULT_FRAME_S,
                        longterm_smooth_s: float = DEFAULT_LONGTERM_SMOOTH_S,
                        shortterm_smooth_s: float = DEFAULT_SHORTTERM_SMOOTH_S) -> "GainModel":
        frame = max(1, int(round(frame_s * sample_rate)))
        return cls(
            MarkovGainModel(frame_len_samples=frame),
            WeibullParams(frame_len_samples=frame),
            odd_length(longterm_smooth_s, sample_rate),
            odd_length(shortterm_smooth_s, sample_rate),
        )


@dataclass
class ExcitationCodebook:
    """Excitation snippets mixed with Gaussian noise at weight ``mix_weight``.

    Entries are rescaled to unit RMS on construction.
    """

    entries: list
    mix_weight: float = DEFAULT_MIX_WEIGHT

    def __post_init__(self):
        if not 0.0 <= self.mix_weight <= 1.0:
            raise ConfigurationError(f"codebook mix weight must be in [0, 1], got {self.mix_weight}")
        if not self.entries and self.mix_weight > 0:
            raise ConfigurationError("codebook is empty but mix weight is > 0")
        normalized = []
        for e in self.entries:
            e = np.asarray(e, dtype=np.float64).ravel()
            rms = np.sqrt(np.mean(e**2)) if e.size else 0.0
            if not rms > 0:
                raise ConfigurationError("codebook entries must be non-empty and not silent")
            normalized.append(e / rms)
        self.entries = normalized

    @classmethod
    def synthetic(cls, num_entries: int = 128, entry_len: int = 4096,
                  sample_rate: float = DEFAULT_SAMPLE_RATE, cutoff_hz: float = 4000.0,
                  seed: int = 20180917, mix_weight: float = DEFAULT_MIX_WEIGHT) -> "ExcitationCodebook":
        """Low-pass filtered Gaussian bursts with tapered edges."""
        rng = RngStream(seed, 0).generator()
        sos = signal.butter(2, min(cutoff_hz, 0.45 * sample_rate), fs=sample_rate, output="sos")
        taper = signal.windows.tukey(entry_len, alpha=0.1)
        entries = [signal.sosfilt(sos, rng.standard_normal(entry_len)) * taper
                   for _ in range(num_entries)]
        return cls(entries, mix_weight)

    @classmethod
    def from_directory(cls, path, mix_weight: float = DEFAULT_MIX_WEIGHT) -> "ExcitationCodebook":
        """Load every ``*.wav`` in ``path`` (sorted by name) as one mono entry."""
        from .audio_io import read_wav

        files = sorted(Path(path).glob("*.wav"))
        if not files:
            raise ConfigurationError(f"no .wav files in codebook directory {path}")
        entries = []
        for f in files:
            data, _ = read_wav(f)
            if data.shape[0] != 1:
                raise ConfigurationError(f"codebook snippet {f.name} is not mono")
            entries.append(data[0])
        return cls(entries, mix_weight)


def simulate_long_term_gain(model: MarkovGainModel, num_frames: int,
                            rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame ``(gains, states)`` from one realization of the Markov chain."""
    if num_frames < 0:
        raise ArgumentError("num_frames must be >= 0")
    cumulative = np.ascontiguousarray(np.cumsum(model.transition_matrix, axis=1))
    uniforms = rng.generator().random(num_frames)
    states = np.asarray(kernels.markov_states(cumulative, model.initial_state, uniforms))
    return model.state_gains[states], states


def weibull_inverse_cdf(u, shape: float, scale: float):
    """``scale * (-ln(1 - u)) ** (1 / shape)``."""
    return scale * (-np.log1p(-np.asarray(u, dtype=np.float64))) ** (1.0 / shape)


def simulate_short_term_gain(params: WeibullParams, num_frames: int, rng: RngStream) -> np.ndarray:
    """Square roots of i.i.d. Weibull frame energies."""
    if num_frames < 0:
        raise ArgumentError("num_frames must be >= 0")
    u = rng.generator().random(num_frames)
    return np.sqrt(weibull_inverse_cdf(u, params.shape, params.scale))


def hann_kernel(length: int) -> np.ndarray:
    """Symmetric Hann kernel with non-zero end taps, normalized to unit sum."""
    if length < 1:
        raise ArgumentError("kernel length must be >= 1")
    h = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(1, length + 1) / (length + 1)))
    return h / h.sum()


def smooth_gain(framewise_gain, frame_len: int, smooth_len: int) -> np.ndarray:
    """Hold each frame gain for ``frame_len`` samples, then smooth with a Hann kernel.

    Edges are extended with the first/last value, so constants pass unchanged and
    the output stays within the input range. Output has ``len(track) * frame_len``
    samples.
    """
    g = np.asarray(framewise_gain, dtype=np.float64)
    if g.size == 0:
        raise ArgumentError("gain track is empty")
    if smooth_len < 1 or smooth_len % 2 == 0:
        raise ArgumentError(f"smoothing length must be odd and >= 1, got {smooth_len}")
    held = np.repeat(g, frame_len)
    if smooth_len == 1:
        return held
    half = smooth_len // 2
    padded = np.pad(held, half, mode="edge")
    kernel = hann_kernel(smooth_len)
    if smooth_len <= 64:
        out = np.convolve(padded, kernel, mode="valid")
    else:
        out = signal.oaconvolve(padded, kernel, mode="valid")
    # FFT roundoff can step a few ulps outside the input range
    return np.clip(out, g.min(), g.max())


def generate_excitation(codebook: ExcitationCodebook, length: int, noise_rng: RngStream,
                        choice_rng: RngStream) -> np.ndarray:
    """Unit-RMS ``(1 - beta) * noise + beta * codebook`` excitation.

    The codebook part is built tile by tile: each tile is one uniformly chosen
    entry, circularly shifted by a uniform random offset. Lengths up to one
    entry therefore contain exactly one (rotated) entry. Drawing a fresh entry
    per tile keeps channels that share a codebook uncorrelated.
    """
    if length < 0:
        raise ArgumentError("length must be >= 0")
    beta = codebook.mix_weight
    if beta > 0 and not codebook.entries:
        raise ConfigurationError("codebook is empty but mix weight is > 0")
    if length == 0:
        return np.zeros(0)
    e = np.zeros(length)
    if beta < 1.0:
        e += (1.0 - beta) * gaussian_noise(noise_rng, length)
    if beta > 0.0:
        gen = choice_rng.generator()
        pos = 0
        parts = []
        while pos < length:
            entry = codebook.entries[int(gen.integers(len(codebook.entries)))]
            offset = int(gen.integers(entry.size))
            tile = np.roll(entry, -offset)
            parts.append(tile[: length - pos])
            pos += tile.size
        e += beta * np.concatenate(parts)
    rms = np.sqrt(np.mean(e**2))
    if not rms > 0:
        raise ArgumentError("excitation is silent")
    return e / rms


def levinson_durbin(r, order: int) -> tuple[np.ndarray, float]:
    """Solve the Yule-Walker equations for autocorrelation ``r[0..order]``.

    Returns ``([1, a_1, ..., a_p], prediction_error_power)``.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.size < order + 1:
        raise ArgumentError(f"need {order + 1} autocorrelation lags, got {r.size}")
    if not r[0] > 0:
        raise ArgumentError("r[0] must be positive")
    a = np.zeros(order + 1)
    a[0] = 1.0
    err = r[0]
    for i in range(1, order + 1):
        k = -(r[i] + a[1:i] @ r[i - 1:0:-1]) / err
        a[1:i + 1] = a[1:i + 1] + k * a[i - 1::-1][:i]
        err *= 1.0 - k * k
    return a, err


def wind_target_psd(freqs, corner_hz: float = TARGET_CORNER_HZ,
                    slope_db_per_octave: float = TARGET_SLOPE_DB_PER_OCTAVE) -> np.ndarray:
    """Flat below ``corner_hz``, falling by ``slope_db_per_octave`` above (power, 0 dB at DC)."""
    f = np.asarray(freqs, dtype=np.float64)
    exponent = slope_db_per_octave / (10.0 * np.log10(2.0))
    return (np.maximum(f, corner_hz) / corner_hz) ** (-exponent)


def ar_psd(coefficients, freqs, sample_rate: float, gain: float = 1.0) -> np.ndarray:
    """Power response ``gain / |A(e^jw)|^2`` of the all-pole filter."""
    a = np.concatenate(([1.0], np.asarray(coefficients, dtype=np.float64)))
    _, h = signal.freqz([1.0], a, worN=np.asarray(freqs, dtype=np.float64), fs=sample_rate)
    return gain * np.abs(h) ** 2


def fit_ar_to_psd(target_psd, sample_rate: float, order: int = AR_ORDER,
                  refine_band: tuple[float, float] | None = FIT_BAND_HZ,
                  iterations: int = 30, damping: float = 0.5) -> tuple[np.ndarray, float]:
    """Fit an all-pole model to a one-sided PSD sampled on ``rfftfreq(2 (n - 1))``.

    Levinson-Durbin on the autocorrelation of the target. With ``refine_band``
    the working PSD is then iteratively pre-distorted inside that band by the
    (median-centred) dB error of the previous fit, which sharpens the knee that a
    low-order all-pole model otherwise rounds off.

    Returns:
        ``(coefficients, gain)`` where ``coefficients = [a_1..a_p]`` in the
        :func:`~mcwind.dsp.allpole_filter` sign convention and ``gain`` minimizes
        the worst-case dB error inside ``refine_band`` (or is the prediction error
        power when no band is given).
    """
    target = np.asarray(target_psd, dtype=np.float64)
    freqs = np.fft.rfftfreq(2 * (target.size - 1), 1.0 / sample_rate)
    work = target.copy()
    band = None
    if refine_band is not None:
        band = (freqs >= refine_band[0]) & (freqs <= refine_band[1])
    for _ in range(iterations if band is not None else 1):
        a, err = levinson_durbin(np.fft.irfft(work)[: order + 1], order)
        if band is None:
            break
        err_db = 10.0 * np.log10(ar_psd(a[1:], freqs[band], sample_rate, err) / target[band])
        work[band] *= 10.0 ** (-damping * (err_db - np.median(err_db)) / 10.0)
    gain = err
    if band is not None:
        err_db = 10.0 * np.log10(ar_psd(a[1:], freqs[band], sample_rate, err) / target[band])
        gain = err * 10.0 ** (-(err_db.max() + err_db.min()) / 20.0)
    return a[1:], float(gain)


@functools.lru_cache(maxsize=8)
def _default_ar(sample_rate: float) -> tuple[tuple[float, ...], float]:
    freqs = np.fft.rfftfreq(2**16, 1.0 / sample_rate)
    coeffs, gain = fit_ar_to_psd(wind_target_psd(freqs), sample_rate)
    return tuple(coeffs), gain


def default_ar_coefficients(sample_rate: float = DEFAULT_SAMPLE_RATE) -> np.ndarray:
    """AR(5) coefficients fitted to :func:`wind_target_psd` at ``sample_rate``."""
    return np.array(_default_ar(float(sample_rate))[0])


def channel_streams(seed: int, channel: int) -> tuple[RngStream, RngStream, RngStream]:
    """``(excitation noise, codebook choice, short-term gain)`` streams of one channel.

    Stream 0 is reserved for the shared long-term Markov chain.
    """
    base = 1 + 3 * channel
    return RngStream(seed, base), RngStream(seed, base + 1), RngStream(seed, base + 2)


def frames_for(num_samples: int, frame_len: int) -> int:
    return -(-num_samples // frame_len)


def generate_single_channel(gain_model: GainModel, codebook: ExcitationCodebook, ar_coeffs,
                            duration_s: float, sample_rate: float, seed: int, channel: int = 0,
                            shared_long_term: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
    """One channel of wind noise, ``round(duration_s * sample_rate)`` samples long.

    Random streams follow :func:`channel_streams`; the long-term chain uses
    stream 0 unless ``shared_long_term`` (per-frame gains and states) is given.
    """
    num_samples = int(round(duration_s * sample_rate))
    if num_samples < 1:
        raise ArgumentError("duration is shorter than one sample")
    mk, wb = gain_model.markov, gain_model.weibull
    lt_frames = frames_for(num_samples, mk.frame_len_samples)
    if shared_long_term is None:
        lt_gain, _ = simulate_long_term_gain(mk, lt_frames, RngStream(seed, LONG_TERM_STREAM))
    else:
        lt_gain = np.asarray(shared_long_term[0], dtype=np.float64)
        if lt_gain.size != lt_frames:
            raise ArgumentError(
                f"shared long-term track has {lt_gain.size} frames, expected {lt_frames}"
            )
    noise_rng, choice_rng, st_rng = channel_streams(seed, channel)
    st_gain = simulate_short_term_gain(wb, frames_for(num_samples, wb.frame_len_samples), st_rng)

    x = generate_excitation(codebook, num_samples, noise_rng, choice_rng)
    x *= smooth_gain(lt_gain, mk.frame_len_samples, gain_model.longterm_smooth_len)[:num_samples]
    x *= smooth_gain(st_gain, wb.frame_len_samples, gain_model.shortterm_smooth_len)[:num_samples]
    return allpole_filter(x, ar_coeffs)

