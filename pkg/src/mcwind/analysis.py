"""Coherence estimation from signals and comparison against the Corcos model.

The estimator averages STFT cross-spectra over all frames::

    gamma_hat_ij(k) = sum_l V_i V_j^* / sqrt(sum_l |V_i|^2 * sum_l |V_j|^2)

using the same Hann / 75 % overlap framing as the generator, with no detrending.
Bins where a channel has no energy at all are undefined and stored as NaN.

Microphones are 0-based in the Python API and 1-based in CSV output.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .corcos import CorcosParams, coherence_pair
from .dsp import DEFAULT_BLOCK_FRAMES, MultichannelBuffer, WindowSpec, iter_stft_blocks, num_frames
from .errors import ArgumentError

log = logging.getLogger(__name__)

MIN_FRAMES = 8
DEFAULT_BAND_LIMIT_HZ = 1000.0


@dataclass(frozen=True)
class CoherenceEstimate:
    """``gamma_hat[i, j, k]`` for all channel pairs and bins ``0..K/2``."""

    gamma_hat: np.ndarray
    num_frames_averaged: int
    window: WindowSpec
    fft_length: int
    sample_rate_hz: float

    @property
    def num_channels(self) -> int:
        return self.gamma_hat.shape[0]

    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.fft_length // 2 + 1) * self.sample_rate_hz / self.fft_length

    def pair(self, i: int, j: int) -> np.ndarray:
        return self.gamma_hat[i, j]


def estimate_coherence(buffer: MultichannelBuffer, window: WindowSpec | None = None,
                       fft_length: int | None = None,
                       block_frames: int = DEFAULT_BLOCK_FRAMES) -> CoherenceEstimate:
    if window is None:
        window = WindowSpec.hann(fft_length or 2048)
    K = fft_length or window.length_samples
    F = num_frames(buffer.num_samples, window)
    if F < MIN_FRAMES:
        raise ArgumentError(f"need at least {MIN_FRAMES} frames, signal gives {F}")
    S = None
    for _, X in iter_stft_blocks(buffer.channels, window, K, block_frames):
        part = kernels.cross_spectra(np.ascontiguousarray(X))
        S = part if S is None else S + part
    power = np.real(np.diagonal(S, axis1=0, axis2=1)).T  # (N, bins)
    norm = np.sqrt(power[:, None, :] * power[None, :, :])
    defined = norm > 0
    gamma = np.full(S.shape, np.nan + 1j * np.nan)
    gamma[defined] = S[defined] / norm[defined]
    # Cauchy-Schwarz holds exactly; trim roundoff above 1
    mag = np.abs(gamma)
    over = defined & (mag > 1.0)
    gamma[over] /= mag[over]
    idx = np.arange(S.shape[0])
    gamma[idx, idx, :] = np.where(defined[idx, idx, :], 1.0 + 0j, np.nan + 1j * np.nan)
    n_undefined = int(np.count_nonzero(~defined[idx, idx, :]))
    if n_undefined:
        log.warning("%d channel-bin(s) carry no energy; coherence left undefined there", n_undefined)
    return CoherenceEstimate(gamma, F, window, K, buffer.sample_rate_hz)


def _check_grid(estimate: CoherenceEstimate, params: CorcosParams) -> None:
    if estimate.fft_length != params.fft_length or estimate.sample_rate_hz != params.sample_rate_hz:
        raise ArgumentError(
            f"estimate grid (K={estimate.fft_length}, Fs={estimate.sample_rate_hz}) does not match "
            f"model grid (K={params.fft_length}, Fs={params.sample_rate_hz})"
        )


def _bins(fft_length: int, sample_rate: float, band_limit_hz: float | None, upper: int) -> np.ndarray:
    k = np.arange(upper)
    if band_limit_hz is not None:
        k = k[k * sample_rate / fft_length <= band_limit_hz]
    return k


@dataclass(frozen=True)
class PairError:
    """nMSE of one microphone pair plus the bins it was computed over."""

    i: int
    j: int
    nmse: float
    bins_used: int
    bins_missing: int


def pair_error(estimate: CoherenceEstimate, params: CorcosParams, pair: tuple[int, int] = (0, 1),
               band_limit_hz: float | None = None) -> PairError:
    _check_grid(estimate, params)
    i, j = pair
    n = estimate.num_channels
    if not (0 <= i < n and 0 <= j < n):
        raise ArgumentError(f"pair {pair} out of range for {n} channels")
    k = _bins(params.fft_length, params.sample_rate_hz, band_limit_hz, params.fft_length // 2)
    est = estimate.gamma_hat[i, j, k]
    model = np.atleast_1d(coherence_pair(params, k, abs(i - j), i >= j))
    ok = np.isfinite(est)
    num = np.sum(np.abs(est[ok] - model[ok]) ** 2)
    den = np.sum(np.abs(model[ok]) ** 2)
    missing = int(k.size - np.count_nonzero(ok))
    if missing:
        log.warning("pair (%d, %d): %d undefined bin(s) excluded from nMSE", i, j, missing)
    return PairError(i, j, float(num / den), int(np.count_nonzero(ok)), missing)


def nmse(estimate: CoherenceEstimate, params: CorcosParams, pair: tuple[int, int] = (0, 1),
         band_limit_hz: float | None = None) -> float:
    """Normalized squared error between estimated and model coherence of one pair.

    ``sum_k |gamma_hat - gamma|^2 / sum_k |gamma|^2`` over ``k = 0 .. K/2 - 1``,
    optionally restricted to ``k * Fs / K <= band_limit_hz``. Undefined bins are
    left out of both sums.
    """
    return pair_error(estimate, params, pair, band_limit_hz).nmse


REPORT_COLUMNS = ("mic_i", "mic_j", "frequency_hz", "re_estimate", "im_estimate",
                  "re_model", "im_model")
SUMMARY_COLUMNS = ("mic_i", "mic_j", "nmse", "bins_used", "bins_missing")


@dataclass
class CoherenceReport:
    rows: list
    summary: list
    band_limit_hz: float

    def write_csv(self, path) -> tuple[Path, Path]:
        """Write the curves to ``path`` and the per-pair summary to ``<stem>_nmse.csv``."""
        path = Path(path)
        summary_path = path.with_name(path.stem + "_nmse.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(REPORT_COLUMNS)
            for r in self.rows:
                w.writerow([r[0], r[1]] + [_fmt(v) for v in r[2:]])
        with open(summary_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(SUMMARY_COLUMNS)
            for s in self.summary:
                w.writerow([s.i + 1, s.j + 1, _fmt(s.nmse), s.bins_used, s.bins_missing])
        return path, summary_path


def _fmt(v: float) -> str:
    return "" if not np.isfinite(v) else repr(float(v))


def coherence_report(estimate: CoherenceEstimate, params: CorcosParams,
                     band_limit_hz: float = DEFAULT_BAND_LIMIT_HZ) -> CoherenceReport:
    """Estimated and model coherence of every pair ``i < j`` up to ``band_limit_hz``."""
    _check_grid(estimate, params)
    k = _bins(params.fft_length, params.sample_rate_hz, band_limit_hz, params.fft_length // 2 + 1)
    freqs = k * params.sample_rate_hz / params.fft_length
    rows, summary = [], []
    n = estimate.num_channels
    for i in range(n):
        for j in range(i + 1, n):
            est = estimate.gamma_hat[i, j, k]
            model = np.atleast_1d(coherence_pair(params, k, j - i, False))
            for f, e, m in zip(freqs, est, model):
                rows.append((i + 1, j + 1, float(f), e.real, e.imag, m.real, m.imag))
            summary.append(pair_error(estimate, params, (i, j), band_limit_hz))
    return CoherenceReport(rows, summary, band_limit_hz)
