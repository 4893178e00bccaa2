"""N-channel generation and coherence imposition.

Coupling between the uncorrelated channels before mixing:

* one long-term Markov track (stream 0) is shared by every channel, so all
  microphones see the same wind state and amplitude envelope;
* excitation noise, codebook choices and short-term gains come from separate
  per-channel streams (``1 + 3c``, ``2 + 3c``, ``3 + 3c`` for channel ``c``);
* a symmetric decorrelation removes the residual zero-lag sample correlation
  that independent but strongly low-pass realizations keep at finite length.

Mixing then applies ``C(k)^H`` to the STFT vector of every frame, where ``C(k)``
is the upper Cholesky factor of the Corcos coherence matrix at bin ``k``, and
resynthesizes by weighted overlap-add.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .corcos import CoherenceMatrixSet, CorcosParams, build_matrix_set
from .dsp import (
    DEFAULT_BLOCK_FRAMES,
    MultichannelBuffer,
    OverlapAdd,
    RngStream,
    WindowSpec,
    iter_stft_blocks,
)
from .errors import ArgumentError, ConfigurationError
from .single_channel import (
    LONG_TERM_STREAM,
    ExcitationCodebook,
    GainModel,
    default_ar_coefficients,
    frames_for,
    generate_single_channel,
    simulate_long_term_gain,
)

log = logging.getLogger(__name__)

PEAK_LEVEL = 0.9


@dataclass
class SimulationConfig:
    corcos: CorcosParams
    gain_model: GainModel = field(default_factory=GainModel)
    codebook: ExcitationCodebook = field(default_factory=ExcitationCodebook.synthetic)
    ar_coeffs: np.ndarray | None = None
    duration_s: float = 60.0
    master_seed: int = 0

    def __post_init__(self):
        if self.ar_coeffs is None:
            self.ar_coeffs = default_ar_coefficients(self.corcos.sample_rate_hz)
        self.ar_coeffs = np.asarray(self.ar_coeffs, dtype=np.float64)
        if not self.duration_s > 0:
            raise ConfigurationError("duration must be positive")
        if self.num_samples < 2 * self.corcos.fft_length:
            raise ConfigurationError(
                f"duration {self.duration_s} s gives {self.num_samples} samples, "
                f"fewer than 2 * fft_length = {2 * self.corcos.fft_length}"
            )
        RngStream(self.master_seed)  # validates the seed range

    @property
    def num_channels(self) -> int:
        return self.corcos.num_channels

    @property
    def sample_rate_hz(self) -> float:
        return self.corcos.sample_rate_hz

    @property
    def num_samples(self) -> int:
        return int(round(self.duration_s * self.corcos.sample_rate_hz))

    @property
    def window(self) -> WindowSpec:
        return WindowSpec.hann(self.corcos.fft_length)


def shared_long_term_track(config: SimulationConfig) -> tuple[np.ndarray, np.ndarray]:
    mk = config.gain_model.markov
    n_frames = frames_for(config.num_samples, mk.frame_len_samples)
    return simulate_long_term_gain(mk, n_frames, RngStream(config.master_seed, LONG_TERM_STREAM))


def decorrelate(channels: np.ndarray) -> np.ndarray:
    """Zero the pairwise sample correlation with the smallest change to each channel.

    Applies ``D^(1/2) S^(-1/2)`` where ``S`` is the centred sample covariance and
    ``D`` its diagonal, so channel powers are kept. Returns the input unchanged for
    a single channel or a (near) singular covariance.
    """
    x = np.asarray(channels, dtype=np.float64)
    if x.shape[0] < 2:
        return x
    centred = x - x.mean(axis=1, keepdims=True)
    cov = centred @ centred.T / x.shape[1]
    lam, vec = np.linalg.eigh(cov)
    if not lam[0] > 1e-12 * lam[-1]:
        log.info("pre-mix covariance is singular; channels left as generated")
        return x
    inv_sqrt = (vec / np.sqrt(lam)) @ vec.T
    return (np.sqrt(np.diag(cov))[:, None] * inv_sqrt) @ x


def generate_uncorrelated_channels(config: SimulationConfig, max_workers: int = 1) -> MultichannelBuffer:
    """N wind noise channels sharing one long-term track, otherwise independent.

    The result has zero pairwise sample correlation (see :func:`decorrelate`).
    """
    long_term = shared_long_term_track(config)
    out = np.empty((config.num_channels, config.num_samples))

    def one(c):
        out[c] = generate_single_channel(
            config.gain_model, config.codebook, config.ar_coeffs, config.duration_s,
            config.sample_rate_hz, config.master_seed, channel=c, shared_long_term=long_term,
        )

    if max_workers > 1 and config.num_channels > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            list(pool.map(one, range(config.num_channels)))
    else:
        for c in range(config.num_channels):
            one(c)
    return MultichannelBuffer(decorrelate(out), config.sample_rate_hz)


def apply_spatial_mixing(buffer: MultichannelBuffer, matrix_set: CoherenceMatrixSet,
                         window: WindowSpec | None = None,
                         block_frames: int = DEFAULT_BLOCK_FRAMES) -> MultichannelBuffer:
    """Impose the coherence of ``matrix_set`` on (assumed uncorrelated) channels.

    Per frame ``l`` and bin ``k`` the output STFT vector is ``C(k)^H V(l, k)``.
    The STFT length is the one the matrices were built for. The signal is
    zero-padded by ``L - hop`` at both ends before framing so every output sample
    lies under a full set of overlapping windows; mixed frames are not a
    consistent STFT, and partial overlap at the edges would amplify them.
    """
    n = buffer.num_channels
    if n != matrix_set.num_channels:
        raise ArgumentError(
            f"buffer has {n} channels but coherence matrices are {matrix_set.num_channels}x"
            f"{matrix_set.num_channels}"
        )
    K = matrix_set.params.fft_length
    window = window or WindowSpec.hann(K)
    if window.length_samples > K:
        raise ArgumentError(f"window length {window.length_samples} exceeds fft length {K}")
    C = np.ascontiguousarray(matrix_set.cholesky_factors)
    pad = window.length_samples - window.hop_samples
    M = buffer.num_samples
    padded = np.pad(buffer.channels, ((0, 0), (pad, pad)))
    ola = OverlapAdd(n, M + 2 * pad, window, K)
    for first, X in iter_stft_blocks(padded, window, K, block_frames):
        ola.add(first, kernels.mix_bins(C, np.ascontiguousarray(X)))
    del padded
    return MultichannelBuffer(ola.result()[:, pad:pad + M], buffer.sample_rate_hz)


def generate(config: SimulationConfig, max_workers: int = 1) -> MultichannelBuffer:
    """Full pipeline; the output is peak-normalized to 0.9 with one gain for all channels.

    The applied gain is stored in ``normalization_gain`` of the returned buffer.
    """
    matrix_set = build_matrix_set(config.corcos)
    n_reg = int(np.count_nonzero(matrix_set.regularization_used))
    if n_reg:
        log.info("regularized %d bin(s); max eps %.3g", n_reg, matrix_set.regularization_used.max())
    raw = generate_uncorrelated_channels(config, max_workers=max_workers)
    mixed = apply_spatial_mixing(raw, matrix_set, config.window)
    del raw
    peak = float(np.max(np.abs(mixed.channels)))
    gain = PEAK_LEVEL / peak if peak > 0 else 1.0
    mixed.channels *= gain
    mixed.normalization_gain = gain
    return mixed
