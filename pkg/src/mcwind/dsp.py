"""Shared DSP primitives: Hann window, STFT/ISTFT, all-pole filtering, seeded noise.

Framing convention
------------------
Frame ``l`` covers samples ``[l * hop, l * hop + L)`` of the signal. The tail is
zero-padded so the last frame reaches past the final sample; there is no head
padding. A signal of ``M >= L`` samples therefore has
``ceil((M - L) / hop) + 1`` frames.

Synthesis is weighted overlap-add: each inverse frame is multiplied by the
analysis window again and the sum is divided by the overlap sum of the squared
window. With the periodic Hann window ``w[0] = 0``, so sample 0 is seen only
through a zero weight and cannot be recovered; ``istft`` returns 0 there.
Every other sample is reconstructed to roundoff.

Random numbers
--------------
:class:`RngStream` maps ``(seed, stream_id)`` to a numpy ``Philox`` counter-based
generator keyed by ``SeedSequence(seed, spawn_key=(stream_id,))``. Same pair,
same samples; different stream ids give independent sequences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import kernels
from .errors import ArgumentError, ConfigurationError

DEFAULT_BLOCK_FRAMES = 512


@dataclass(frozen=True)
class WindowSpec:
    """Analysis/synthesis window of ``length_samples`` advanced by ``hop_samples``."""

    length_samples: int
    hop_samples: int
    kind: str = "hann"

    def __post_init__(self):
        L, hop = self.length_samples, self.hop_samples
        if not isinstance(L, (int, np.integer)) or not isinstance(hop, (int, np.integer)):
            raise ConfigurationError("window length and hop must be integers")
        if L < 2:
            raise ConfigurationError(f"window length must be >= 2, got {L}")
        if hop < 1 or hop > L:
            raise ConfigurationError(f"hop must be in [1, {L}], got {hop}")
        if L % hop:
            raise ConfigurationError(f"hop {hop} does not divide window length {L}")
        if self.kind != "hann":
            raise ConfigurationError(f"unsupported window kind {self.kind!r}")

    @classmethod
    def hann(cls, length_samples: int, overlap: float = 0.75) -> "WindowSpec":
        hop = int(round(length_samples * (1.0 - overlap)))
        return cls(length_samples, hop)

    @property
    def overlap(self) -> float:
        return 1.0 - self.hop_samples / self.length_samples


def make_window(spec: WindowSpec) -> np.ndarray:
    """Periodic Hann window ``0.5 * (1 - cos(2 pi n / L))``, ``n = 0..L-1``."""
    n = np.arange(spec.length_samples)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / spec.length_samples))


def squared_overlap_sum(spec: WindowSpec) -> np.ndarray:
    """Steady-state sum of shifted squared windows over one hop period."""
    w2 = make_window(spec) ** 2
    return w2.reshape(-1, spec.hop_samples).sum(axis=0)


def check_cola(spec: WindowSpec, rtol: float = 1e-10) -> float:
    """Return the constant squared-window overlap sum, or raise if it is not constant."""
    s = squared_overlap_sum(spec)
    if np.ptp(s) > rtol * np.max(s):
        raise ConfigurationError(
            f"window {spec.kind} L={spec.length_samples} hop={spec.hop_samples} "
            "does not satisfy the squared-window overlap-add condition"
        )
    return float(s.mean())


@dataclass
class MultichannelBuffer:
    """``channels`` has shape ``(N, num_samples)``; row ``c`` is microphone ``c``."""

    channels: np.ndarray
    sample_rate_hz: float
    normalization_gain: float | None = None

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim == 1:
            ch = ch[np.newaxis, :]
        if ch.ndim != 2 or ch.shape[0] < 1:
            raise ArgumentError(f"channels must be (N, samples) with N >= 1, got shape {ch.shape}")
        if not self.sample_rate_hz > 0:
            raise ArgumentError("sample rate must be positive")
        self.channels = ch

    @property
    def num_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def num_samples(self) -> int:
        return self.channels.shape[1]

    @property
    def duration_s(self) -> float:
        return self.num_samples / self.sample_rate_hz


@dataclass
class SpectralFrames:
    """One-sided STFT coefficients indexed ``(channel, frame, bin)``."""

    coefficients: np.ndarray
    window: WindowSpec
    fft_length: int
    signal_length: int
    sample_rate_hz: float = 1.0

    def __post_init__(self):
        if self.coefficients.ndim != 3:
            raise ArgumentError("coefficients must be (channel, frame, bin)")
        if self.coefficients.shape[2] != self.fft_length // 2 + 1:
            raise ArgumentError(
                f"expected {self.fft_length // 2 + 1} bins, got {self.coefficients.shape[2]}"
            )

    @property
    def num_frames(self) -> int:
        return self.coefficients.shape[1]


def num_frames(signal_length: int, spec: WindowSpec) -> int:
    if signal_length <= 0:
        return 0
    if signal_length <= spec.length_samples:
        return 1
    return math.ceil((signal_length - spec.length_samples) / spec.hop_samples) + 1


def _check_fft_length(spec: WindowSpec, fft_length: int | None) -> int:
    K = spec.length_samples if fft_length is None else int(fft_length)
    if K < spec.length_samples:
        raise ConfigurationError(f"fft length {K} shorter than window {spec.length_samples}")
    return K


def _analyze_block(x: np.ndarray, spec: WindowSpec, K: int, window: np.ndarray,
                   start: int, stop: int) -> np.ndarray:
    L, hop = spec.length_samples, spec.hop_samples
    lo = start * hop
    hi = (stop - 1) * hop + L
    seg = x[:, lo:min(hi, x.shape[1])]
    if seg.shape[1] < hi - lo:
        seg = np.concatenate([seg, np.zeros((x.shape[0], hi - lo - seg.shape[1]))], axis=1)
    frames = sliding_window_view(seg, L, axis=1)[:, ::hop, :]
    return np.fft.rfft(frames * window, n=K, axis=-1)


def iter_stft_blocks(x: np.ndarray, spec: WindowSpec, fft_length: int | None = None,
                     block_frames: int = DEFAULT_BLOCK_FRAMES):
    """Yield ``(first_frame, coefficients)`` for consecutive runs of frames.

    Concatenating the blocks along the frame axis gives exactly ``stft``.
    Keeps memory bounded for long signals.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    K = _check_fft_length(spec, fft_length)
    window = make_window(spec)
    total = num_frames(x.shape[1], spec)
    for start in range(0, total, block_frames):
        stop = min(start + block_frames, total)
        yield start, _analyze_block(x, spec, K, window, start, stop)


def stft(buffer: MultichannelBuffer, spec: WindowSpec, fft_length: int | None = None) -> SpectralFrames:
    if buffer.num_samples == 0:
        raise ArgumentError("cannot analyze an empty buffer")
    K = _check_fft_length(spec, fft_length)
    window = make_window(spec)
    F = num_frames(buffer.num_samples, spec)
    coeffs = _analyze_block(buffer.channels, spec, K, window, 0, F)
    return SpectralFrames(coeffs, spec, K, buffer.num_samples, buffer.sample_rate_hz)


class OverlapAdd:
    """Accumulates synthesized frame blocks; ``result()`` applies the window-sum normalization."""

    def __init__(self, num_channels: int, signal_length: int, spec: WindowSpec, fft_length: int):
        check_cola(spec)
        self.spec = spec
        self.fft_length = _check_fft_length(spec, fft_length)
        self.signal_length = signal_length
        self.num_frames = num_frames(signal_length, spec)
        self._window = make_window(spec)
        padded = (self.num_frames - 1) * spec.hop_samples + spec.length_samples
        self._acc = np.zeros((num_channels, padded))

    def add(self, first_frame: int, coefficients: np.ndarray) -> None:
        L, hop = self.spec.length_samples, self.spec.hop_samples
        y = np.fft.irfft(coefficients, n=self.fft_length, axis=-1)[..., :L] * self._window
        n_block = y.shape[1]
        # hop divides L, so the frames split into L/hop interleaved non-overlapping groups
        for q in range(L // hop):
            idx = np.arange(q, n_block, L // hop)
            if idx.size == 0:
                continue
            lo = (first_frame + q) * hop
            # frames within a group are exactly L apart, so they tile contiguously
            seg = y[:, idx, :].reshape(y.shape[0], -1)
            self._acc[:, lo:lo + seg.shape[1]] += seg

    def result(self) -> np.ndarray:
        L, hop = self.spec.length_samples, self.spec.hop_samples
        w2 = self._window ** 2
        den = np.zeros(self._acc.shape[1])
        for q in range(L // hop):
            n_group = len(range(q, self.num_frames, L // hop))
            lo = q * hop
            den[lo:lo + n_group * L] += np.tile(w2, n_group)
        out = np.zeros_like(self._acc)
        # floor relative to the steady-state sum; only exact zeros (sample 0) fall below it
        good = den > 1e-30 * den.max()
        out[:, good] = self._acc[:, good] / den[good]
        return out[:, : self.signal_length]


def istft(frames: SpectralFrames) -> MultichannelBuffer:
    ola = OverlapAdd(frames.coefficients.shape[0], frames.signal_length, frames.window,
                     frames.fft_length)
    if frames.num_frames != ola.num_frames:
        raise ArgumentError(
            f"{frames.num_frames} frames do not match signal length {frames.signal_length}"
        )
    ola.add(0, frames.coefficients)
    return MultichannelBuffer(ola.result(), frames.sample_rate_hz)


def _check_stable(a: np.ndarray) -> None:
    if a.size == 0 or not np.any(a):
        return
    roots = np.roots(np.concatenate(([1.0], a)))
    if roots.size and np.max(np.abs(roots)) >= 1.0:
        raise ConfigurationError(
            f"all-pole filter is unstable (max pole radius {np.max(np.abs(roots)):.6g})"
        )


def allpole_filter(x, coefficients) -> np.ndarray:
    """Filter ``x`` through ``1 / A(z)`` with zero initial state.

    Sign convention: ``coefficients = [a_1, ..., a_p]`` are the trailing terms of
    ``A(z) = 1 + a_1 z^-1 + ... + a_p z^-p``, so

        y[n] = x[n] - a_1 y[n-1] - ... - a_p y[n-p]

    This matches ``scipy.signal.lfilter([1], [1, a_1, ..., a_p], x)``.
    """
    a = np.ascontiguousarray(coefficients, dtype=np.float64).ravel()
    if not np.all(np.isfinite(a)):
        raise ConfigurationError("filter coefficients must be finite")
    _check_stable(a)
    x = np.ascontiguousarray(x, dtype=np.float64)
    return kernels.allpole_filter(x, a)


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream identified by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.stream_id) < 0:
            raise ConfigurationError("stream id must be non-negative")

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of the stream."""
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(ss))


def gaussian_noise(stream: RngStream, length: int) -> np.ndarray:
    if length < 0:
        raise ArgumentError("length must be >= 0")
    return stream.generator().standard_normal(int(length))
