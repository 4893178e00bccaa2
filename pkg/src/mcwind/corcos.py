"""Corcos coherence of turbulent wind pressure over a uniform linear array.

For two microphones ``s`` spacings apart, at DFT bin ``k``::

    omega_k = 2 pi k Fs / K
    gamma   = exp(omega_k * s * d * (-alpha(theta) +/- 1j cos(theta)) / Uc)
    alpha(theta) = alpha_1 |cos(theta)| + alpha_2 |sin(theta)|

with the ``+`` sign when the row index is >= the column index and ``Uc``
the convective speed (``convective_ratio * U``). The resulting matrices are
Hermitian, Toeplitz, unit-diagonal and positive definite for every bin except
DC, where all entries are 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ArgumentError, ConfigurationError, ModelError

#: Decay rates used when none are given. Stand-ins, not measured values; override freely.
DEFAULT_ALPHA_LONGITUDINAL = 0.125
DEFAULT_ALPHA_LATERAL = 0.7
DEFAULT_CONVECTIVE_RATIO = 0.8

EPS_START = 1e-12
EPS_GROWTH = 10.0
EPS_MAX = 1e-3

# float(pi/2) has cos ~ 6e-17; treat such residues as exact zeros so crosswind stays real
_TRIG_SNAP = 1e-15


def _snapped_trig(theta: float) -> tuple[float, float]:
    c, s = math.cos(theta), math.sin(theta)
    if abs(c) < _TRIG_SNAP:
        c = 0.0
    if abs(s) < _TRIG_SNAP:
        s = 0.0
    return c, s


@dataclass(frozen=True)
class CorcosParams:
    mic_spacing_m: float
    freefield_speed_mps: float
    doa_rad: float
    alpha_longitudinal: float = DEFAULT_ALPHA_LONGITUDINAL
    alpha_lateral: float = DEFAULT_ALPHA_LATERAL
    convective_ratio: float = DEFAULT_CONVECTIVE_RATIO
    sample_rate_hz: float = 16000.0
    fft_length: int = 2048
    num_channels: int = 2

    def __post_init__(self):
        for name in ("mic_spacing_m", "freefield_speed_mps", "doa_rad", "alpha_longitudinal",
                     "alpha_lateral", "convective_ratio", "sample_rate_hz"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"{name} must be finite")
        for name in ("mic_spacing_m", "freefield_speed_mps", "alpha_longitudinal",
                     "alpha_lateral", "convective_ratio", "sample_rate_hz"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 <= self.doa_rad < 2.0 * math.pi:
            raise ConfigurationError(f"doa_rad must lie in [0, 2pi), got {self.doa_rad}")
        if int(self.fft_length) != self.fft_length or self.fft_length < 2 or self.fft_length % 2:
            raise ConfigurationError(f"fft_length must be an even integer >= 2, got {self.fft_length}")
        if int(self.num_channels) != self.num_channels or self.num_channels < 1:
            raise ConfigurationError(f"num_channels must be >= 1, got {self.num_channels}")

    @property
    def convective_speed_mps(self) -> float:
        return self.convective_ratio * self.freefield_speed_mps

    @property
    def decay(self) -> float:
        return decay_alpha(self.doa_rad, self.alpha_longitudinal, self.alpha_lateral)

    @property
    def num_bins(self) -> int:
        return self.fft_length // 2 + 1

    def angular_frequency(self, k):
        return 2.0 * np.pi * np.asarray(k, dtype=np.float64) * self.sample_rate_hz / self.fft_length

    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.num_bins) * self.sample_rate_hz / self.fft_length


def decay_alpha(theta_w: float, alpha1: float, alpha2: float) -> float:
    """Direction-dependent decay ``alpha1 |cos theta| + alpha2 |sin theta|``."""
    if not all(math.isfinite(v) for v in (theta_w, alpha1, alpha2)):
        raise ArgumentError("decay_alpha needs finite inputs")
    if not (alpha1 > 0 and alpha2 > 0):
        raise ArgumentError("decay rates must be positive")
    c, s = _snapped_trig(theta_w)
    return alpha1 * abs(c) + alpha2 * abs(s)


def _exponent(params: CorcosParams, k, separation, sign):
    """Real and imaginary parts of the log-coherence; shapes broadcast."""
    c, _ = _snapped_trig(params.doa_rad)
    scale = params.angular_frequency(k) * params.mic_spacing_m * separation / params.convective_speed_mps
    return -params.decay * scale, sign * c * scale


def coherence_pair(params: CorcosParams, k, separation: int, i_ge_j: bool = True):
    """Model coherence ``gamma_ij(k)`` for microphones ``separation = |i - j|`` apart.

    ``i_ge_j`` selects the orientation: ``+1j cos(theta)`` in the phase when the
    first index is the larger one, ``-1j cos(theta)`` otherwise.
    ``k`` may be an array of bins.
    """
    k_arr = np.asarray(k)
    if np.any(k_arr < 0) or np.any(k_arr > params.fft_length // 2):
        raise ArgumentError(f"bin index outside 0..{params.fft_length // 2}")
    if separation < 0:
        raise ArgumentError("separation must be >= 0")
    re, im = _exponent(params, k_arr, separation, 1.0 if i_ge_j else -1.0)
    mag = np.exp(re)
    out = mag * np.cos(im) + 1j * (mag * np.sin(im))
    return complex(out) if out.ndim == 0 else out


def coherence_matrices(params: CorcosParams) -> np.ndarray:
    """All bins at once, shape ``(K/2 + 1, N, N)``."""
    n = params.num_channels
    idx = np.arange(n)
    separation = np.abs(idx[:, None] - idx[None, :]).astype(np.float64)
    sign = np.where(idx[:, None] >= idx[None, :], 1.0, -1.0)
    k = np.arange(params.num_bins)[:, None, None]
    re, im = _exponent(params, k, separation[None], sign[None])
    mag = np.exp(re)
    return mag * np.cos(im) + 1j * (mag * np.sin(im))


def coherence_matrix(params: CorcosParams, k: int) -> np.ndarray:
    if not 0 <= k <= params.fft_length // 2:
        raise ArgumentError(f"bin index {k} outside 0..{params.fft_length // 2}")
    n = params.num_channels
    out = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            out[i, j] = coherence_pair(params, k, abs(i - j), i >= j)
    return out


def _regularized(matrix: np.ndarray, eps: float) -> np.ndarray:
    if eps == 0.0:
        return matrix
    return (matrix + eps * np.eye(matrix.shape[-1])) / (1.0 + eps)


def cholesky_upper(matrix, regularization: float = 0.0) -> tuple[np.ndarray, float]:
    """Upper-triangular ``C`` with ``C^H C = (A + eps I) / (1 + eps)``.

    Tries ``eps = regularization`` first. If that matrix is not numerically
    positive definite, ``eps`` restarts at 1e-12 (or ten times the requested
    value, whichever is larger) and grows tenfold until factorization succeeds.

    Returns:
        ``(C, eps_used)``. ``C`` has a real, strictly positive diagonal.

    Raises:
        ModelError: still not positive definite at ``eps = 1e-3``.
    """
    A = np.asarray(matrix, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ArgumentError(f"expected a square matrix, got shape {A.shape}")
    if not np.allclose(A, A.conj().T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ArgumentError("matrix is not Hermitian")
    if regularization < 0:
        raise ArgumentError("regularization must be >= 0")
    eps = float(regularization)
    C, ok = kernels.cholesky_upper(np.ascontiguousarray(_regularized(A, eps)[None]))
    if ok[0]:
        return C[0], eps
    eps = max(EPS_START, eps * EPS_GROWTH)
    while eps <= EPS_MAX * (1 + 1e-9):
        C, ok = kernels.cholesky_upper(np.ascontiguousarray(_regularized(A, eps)[None]))
        if ok[0]:
            return C[0], eps
        eps *= EPS_GROWTH
    raise ModelError("coherence matrix is not positive definite even with eps = 1e-3")


@dataclass(frozen=True)
class CoherenceMatrixSet:
    """Per-bin coherence matrices, their upper Cholesky factors and the ``eps`` used per bin.

    ``cholesky_factors[k]^H @ cholesky_factors[k]`` equals
    ``(matrices[k] + eps_k I) / (1 + eps_k)``.
    """

    params: CorcosParams
    matrices: np.ndarray
    cholesky_factors: np.ndarray
    regularization_used: np.ndarray

    @property
    def num_channels(self) -> int:
        return self.matrices.shape[-1]

    @property
    def num_bins(self) -> int:
        return self.matrices.shape[0]

    def regularized_matrix(self, k: int) -> np.ndarray:
        return _regularized(self.matrices[k], float(self.regularization_used[k]))


def build_matrix_set(params: CorcosParams) -> CoherenceMatrixSet:
    matrices = coherence_matrices(params)
    factors, ok = kernels.cholesky_upper(np.ascontiguousarray(matrices))
    eps = np.zeros(params.num_bins)
    for k in np.flatnonzero(~ok):
        try:
            factors[k], eps[k] = cholesky_upper(matrices[k])
        except ModelError as exc:
            raise ModelError(f"bin {k}: {exc}", bin_index=int(k)) from exc
    for arr in (matrices, factors, eps):
        arr.setflags(write=False)
    return CoherenceMatrixSet(params, matrices, factors, eps)
