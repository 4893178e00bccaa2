"""RIFF WAVE reading and writing.

Float-32 output is the default because quantization noise would bias coherence
estimates at low levels. 16-bit PCM uses TPDF dither (difference of two uniform
variables, +-1 LSB peak) drawn from a dedicated random stream.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .dsp import MultichannelBuffer, RngStream
from .errors import ArgumentError

FORMATS = ("float32", "pcm16")
DITHER_STREAM = 1_000_000


def _to_pcm16(x: np.ndarray, seed: int) -> np.ndarray:
    gen = RngStream(seed, DITHER_STREAM).generator()
    scaled = x * 32767.0
    dither = gen.random(scaled.shape) - gen.random(scaled.shape)
    return np.clip(np.round(scaled + dither), -32768, 32767).astype(np.int16)


def write_wav(path, buffer: MultichannelBuffer, fmt: str = "float32", dither_seed: int = 0) -> None:
    """Write all channels interleaved into one file (channel order = array order)."""
    if fmt not in FORMATS:
        raise ArgumentError(f"unknown sample format {fmt!r}; expected one of {FORMATS}")
    rate = int(round(buffer.sample_rate_hz))
    data = buffer.channels.T
    if fmt == "float32":
        out = np.ascontiguousarray(data, dtype=np.float32)
    else:
        out = np.ascontiguousarray(_to_pcm16(data, dither_seed))
    if out.shape[1] == 1:
        out = out[:, 0]
    wavfile.write(str(path), rate, out)


def write_split(path, buffer: MultichannelBuffer, fmt: str = "float32", dither_seed: int = 0) -> list[Path]:
    """One mono file per channel: ``<stem>_mic1.wav``, ``<stem>_mic2.wav``, ..."""
    path = Path(path)
    written = []
    for c in range(buffer.num_channels):
        p = path.with_name(f"{path.stem}_mic{c + 1}{path.suffix or '.wav'}")
        mono = MultichannelBuffer(buffer.channels[c], buffer.sample_rate_hz)
        # distinct dither per channel so quantization errors stay uncorrelated
        write_wav(p, mono, fmt, dither_seed=(dither_seed + c) % 2**64)
        written.append(p)
    return written


def read_wav(path) -> tuple[np.ndarray, float]:
    """Return ``(channels, sample_rate)`` with ``channels`` shaped ``(N, samples)`` in [-1, 1]."""
    rate, data = wavfile.read(str(path))
    if data.dtype == np.int16:
        x = data / 32768.0
    elif data.dtype == np.int32:
        x = data / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    else:
        x = data.astype(np.float64)
    x = np.atleast_2d(x.T) if x.ndim == 2 else x[np.newaxis, :]
    return np.ascontiguousarray(x, dtype=np.float64), float(rate)
