"""Flat ``key = value`` run configuration.

One setting per line, ``#`` starts a comment, blank lines are ignored. Unknown
keys are rejected. Every key has a default (see ``mcwind generate --dump-config``),
and feeding a dump back in reproduces the run exactly.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .corcos import (
    DEFAULT_ALPHA_LATERAL,
    DEFAULT_ALPHA_LONGITUDINAL,
    DEFAULT_CONVECTIVE_RATIO,
    CorcosParams,
)
from .errors import ConfigurationError
from .multichannel import SimulationConfig
from .single_channel import (
    DEFAULT_MIX_WEIGHT,
    DEFAULT_STATE_GAINS,
    DEFAULT_WEIBULL_SCALE,
    DEFAULT_WEIBULL_SHAPE,
    ExcitationCodebook,
    GainModel,
    MarkovGainModel,
    WeibullParams,
    default_transition_matrix,
    odd_length,
)


class ConfigKeyError(ConfigurationError):
    """A configuration value is missing, unknown or invalid; ``key`` names it."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


_ANGLE = re.compile(r"^\s*([-+]?[0-9.eE+-]+)\s*(deg|rad)?\s*$")


def parse_angle(text: str) -> float:
    """Radians by default; ``"90deg"`` or ``"90 deg"`` for degrees."""
    m = _ANGLE.match(str(text))
    if not m:
        raise ValueError(f"not an angle: {text!r}")
    value = float(m.group(1))
    return math.radians(value) if m.group(2) == "deg" else value


def _floats(text: str) -> list[float]:
    text = text.strip()
    return [float(v) for v in re.split(r"[,\s]+", text)] if text else []


def _positive(v: float) -> float:
    if not (math.isfinite(v) and v > 0):
        raise ValueError("must be a finite positive number")
    return v


def _nonneg_int(v: int) -> int:
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _doa(v: float) -> float:
    if not 0.0 <= v < 2.0 * math.pi:
        raise ValueError("must lie in [0, 2pi) rad (or [0, 360) deg)")
    return v


def _fmt_floats(values) -> str:
    return ", ".join(repr(float(v)) for v in values)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: str
    help: str
    check: Callable[[Any], Any] = lambda v: v
    show: Callable[[Any], str] = lambda v: repr(v) if isinstance(v, float) else str(v)


KEYS: dict[str, Key] = {
    # scene
    "num_channels": Key(int, "2", "microphones in the uniform linear array", _positive),
    "mic_spacing_m": Key(float, "0.004", "adjacent microphone spacing d [m]", _positive),
    "freefield_speed_mps": Key(float, "1.8", "free-field wind speed U [m/s]", _positive),
    "doa": Key(parse_angle, repr(math.pi / 2), "wind direction vs array axis [rad, or e.g. 90deg]", _doa),
    "convective_ratio": Key(float, repr(DEFAULT_CONVECTIVE_RATIO), "convective speed / free-field speed", _positive),
    "alpha_longitudinal": Key(float, repr(DEFAULT_ALPHA_LONGITUDINAL), "longitudinal decay rate alpha_1", _positive),
    "alpha_lateral": Key(float, repr(DEFAULT_ALPHA_LATERAL), "lateral decay rate alpha_2", _positive),
    # signal
    "sample_rate_hz": Key(float, "16000.0", "sampling rate [Hz]", _positive),
    "fft_length": Key(int, "2048", "STFT length K for mixing and analysis (Hann, 75% overlap)", _positive),
    "duration_s": Key(float, "600.0", "signal duration [s]", _positive),
    "seed": Key(int, "0", "master seed (64-bit unsigned)", _nonneg_int),
    # gain model
    "frame_ms": Key(float, "10.0", "gain frame length [ms]", _positive),
    "state_gains": Key(_floats, _fmt_floats(DEFAULT_STATE_GAINS), "long-term gains: no wind, low, high",
                       show=_fmt_floats),
    "transition_matrix": Key(_floats, _fmt_floats(default_transition_matrix().ravel()),
                             "3x3 Markov transition matrix, row-major", show=_fmt_floats),
    "initial_state": Key(int, "1", "initial Markov state (0 no wind, 1 low, 2 high)"),
    "weibull_shape": Key(float, repr(DEFAULT_WEIBULL_SHAPE), "Weibull shape of frame energies", _positive),
    "weibull_scale": Key(float, repr(DEFAULT_WEIBULL_SCALE), "Weibull scale of frame energies", _positive),
    "longterm_smooth_ms": Key(float, "500.0", "Hann smoothing of the long-term gain [ms]", _positive),
    "shortterm_smooth_ms": Key(float, "30.0", "Hann smoothing of the short-term gain [ms]", _positive),
    # excitation and spectral shape
    "codebook_dir": Key(str, "", "directory of mono WAV excitation snippets (empty: synthetic)"),
    "codebook_mix_weight": Key(float, repr(DEFAULT_MIX_WEIGHT), "weight of the codebook vs Gaussian noise"),
    "ar_coeffs": Key(_floats, "", "a_1..a_p of A(z) = 1 + sum a_m z^-m (empty: fitted default)",
                     show=_fmt_floats),
    # output and analysis
    "output_format": Key(str, "float32", "WAV sample format: float32 or pcm16"),
    "band_limit_hz": Key(float, "1000.0", "upper frequency for reports and nMSE [Hz]", _positive),
}


def parse_config_text(text: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigKeyError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigKeyError(key, "unknown configuration key")
        raw[key] = value
    return raw


def _blame(default_key: str, message: str) -> str:
    for word, key in (("transition", "transition_matrix"), ("initial state", "initial_state"),
                      ("Weibull shape", "weibull_shape"), ("Weibull scale", "weibull_scale"),
                      ("smoothing", "longterm_smooth_ms")):
        if word in message:
            return key
    return default_key


@dataclass
class RunConfig:
    values: dict[str, Any]

    @classmethod
    def from_strings(cls, raw: dict[str, str]) -> "RunConfig":
        values = {}
        for key, spec in KEYS.items():
            text = raw.get(key, spec.default)
            try:
                values[key] = spec.check(spec.parse(text))
            except (ValueError, TypeError) as exc:
                raise ConfigKeyError(key, f"invalid value {text!r} ({exc})") from None
        unknown = set(raw) - set(KEYS)
        if unknown:
            raise ConfigKeyError(sorted(unknown)[0], "unknown configuration key")
        cfg = cls(values)
        cfg._cross_check()
        return cfg

    @classmethod
    def load(cls, path=None, overrides: dict[str, str] | None = None) -> "RunConfig":
        raw = parse_config_text(Path(path).read_text(encoding="utf-8")) if path else {}
        for key, value in (overrides or {}).items():
            if key not in KEYS:
                raise ConfigKeyError(key, "unknown configuration key")
            raw[key] = value
        return cls.from_strings(raw)

    def __getitem__(self, key):
        return self.values[key]

    def _cross_check(self):
        v = self.values
        if len(v["state_gains"]) != 3:
            raise ConfigKeyError("state_gains", "expected 3 values")
        if len(v["transition_matrix"]) != 9:
            raise ConfigKeyError("transition_matrix", "expected 9 values (3x3 row-major)")
        if v["output_format"] not in ("float32", "pcm16"):
            raise ConfigKeyError("output_format", "must be float32 or pcm16")
        if not 0.0 <= v["codebook_mix_weight"] <= 1.0:
            raise ConfigKeyError("codebook_mix_weight", "must lie in [0, 1]")
        if v["seed"] >= 2**64:
            raise ConfigKeyError("seed", "must fit in 64 bits")
        if v["fft_length"] % 2:
            raise ConfigKeyError("fft_length", "must be even")
        # the remaining checks live in the dataclasses; re-raise them under the key's name
        for key, build in (("state_gains", self.gain_model), ("ar_coeffs", self._check_ar),
                           ("codebook_dir", self.codebook), ("duration_s", self.simulation_config)):
            try:
                build()
            except ConfigKeyError:
                raise
            except ConfigurationError as exc:
                raise ConfigKeyError(_blame(key, str(exc)), str(exc)) from None

    def _check_ar(self):
        from .dsp import _check_stable

        _check_stable(np.asarray(self.values["ar_coeffs"], dtype=np.float64))

    def dump(self) -> str:
        lines = ["# mcwind run configuration"]
        for key, spec in KEYS.items():
            lines.append(f"# {spec.help}")
            lines.append(f"{key} = {spec.show(self.values[key])}")
        return "\n".join(lines) + "\n"

    def corcos_params(self) -> CorcosParams:
        v = self.values
        return CorcosParams(
            mic_spacing_m=v["mic_spacing_m"], freefield_speed_mps=v["freefield_speed_mps"],
            doa_rad=v["doa"], alpha_longitudinal=v["alpha_longitudinal"],
            alpha_lateral=v["alpha_lateral"], convective_ratio=v["convective_ratio"],
            sample_rate_hz=v["sample_rate_hz"], fft_length=v["fft_length"],
            num_channels=v["num_channels"],
        )

    def gain_model(self) -> GainModel:
        v = self.values
        fs = v["sample_rate_hz"]
        frame = max(1, int(round(v["frame_ms"] * fs / 1000.0)))
        return GainModel(
            MarkovGainModel(np.array(v["state_gains"]), np.array(v["transition_matrix"]).reshape(3, 3),
                            v["initial_state"], frame),
            WeibullParams(v["weibull_shape"], v["weibull_scale"], frame),
            odd_length(v["longterm_smooth_ms"] / 1000.0, fs),
            odd_length(v["shortterm_smooth_ms"] / 1000.0, fs),
        )

    def codebook(self) -> ExcitationCodebook:
        v = self.values
        if v["codebook_dir"]:
            return ExcitationCodebook.from_directory(v["codebook_dir"], v["codebook_mix_weight"])
        return ExcitationCodebook.synthetic(sample_rate=v["sample_rate_hz"],
                                            mix_weight=v["codebook_mix_weight"])

    def simulation_config(self) -> SimulationConfig:
        v = self.values
        ar = v["ar_coeffs"] or None
        return SimulationConfig(self.corcos_params(), self.gain_model(), self.codebook(), ar,
                                v["duration_s"], v["seed"])
