"""Reference scenes and pass/fail checks for generated coherence.

Each scene is generated, re-analyzed with the same STFT grid and compared to the
model. ``run_scene`` returns one :class:`Check` per criterion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .analysis import estimate_coherence, pair_error
from .corcos import CorcosParams
from .multichannel import SimulationConfig, generate

NMSE_MAX = 0.05
CROSSWIND_IMAG_MAX = 0.05
BAND_LIMIT_HZ = 1000.0
DECAY_BAND_HZ = (50.0, 500.0)
DURATION_S = 600.0


@dataclass(frozen=True)
class Scene:
    name: str
    description: str
    num_channels: int
    mic_spacing_m: float
    freefield_speed_mps: float
    doa_rad: float

    def params(self, base: CorcosParams | None = None) -> CorcosParams:
        geometry = dict(num_channels=self.num_channels, mic_spacing_m=self.mic_spacing_m,
                        freefield_speed_mps=self.freefield_speed_mps, doa_rad=self.doa_rad)
        if base is None:
            return CorcosParams(**geometry)
        return replace(base, **geometry)


SCENES = (
    Scene("crosswind", "N=2, d=4 mm, U=1.8 m/s, theta=pi/2", 2, 0.004, 1.8, math.pi / 2),
    Scene("downwind", "N=2, d=20 mm, U=2.8 m/s, theta=0", 2, 0.020, 2.8, 0.0),
    Scene("array4", "N=4, d=4 mm, U=1.8 m/s, theta=pi/2", 4, 0.004, 1.8, math.pi / 2),
)


@dataclass(frozen=True)
class Check:
    scene: str
    criterion: str
    value: float
    threshold: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.scene:<10} {self.criterion:<34} {self.value:.5f} (limit {self.threshold})"


def evaluate(scene: Scene, estimate, model: CorcosParams) -> list[Check]:
    """Criteria for one analyzed scene; ``model`` is what the estimate is compared to."""
    checks = []
    for i in range(scene.num_channels - 1):
        err = pair_error(estimate, model, (i, i + 1), BAND_LIMIT_HZ)
        checks.append(Check(scene.name, f"nMSE mic {i + 1}-{i + 2} (<= {BAND_LIMIT_HZ:g} Hz)",
                            err.nmse, NMSE_MAX, err.nmse <= NMSE_MAX))
    freqs = estimate.bin_frequencies()
    if math.isclose(scene.doa_rad, math.pi / 2):
        band = freqs <= BAND_LIMIT_HZ
        im = float(np.nanmax(np.abs(estimate.gamma_hat[0, 1, band].imag)))
        checks.append(Check(scene.name, "max |Im gamma_12| (crosswind)", im, CROSSWIND_IMAG_MAX,
                            im <= CROSSWIND_IMAG_MAX))
    if scene.num_channels >= 3:
        band = (freqs >= DECAY_BAND_HZ[0]) & (freqs <= DECAY_BAND_HZ[1])
        g12 = float(np.nanmean(np.abs(estimate.gamma_hat[0, 1, band])))
        g13 = float(np.nanmean(np.abs(estimate.gamma_hat[0, 2, band])))
        checks.append(Check(scene.name, "mean|g13| - mean|g12| (50-500 Hz)", g13 - g12, 0.0, g13 < g12))
    return checks


def run_scene(scene: Scene, base: SimulationConfig | None = None, duration_s: float = DURATION_S,
              seed: int | None = None, model_alpha_scale: float = 1.0) -> tuple[list[Check], object]:
    """Generate ``scene`` and check it against the model.

    ``base`` supplies everything but the geometry (gain model, codebook, decay
    rates, ...). ``model_alpha_scale`` multiplies the decay rates of the
    comparison model only, to demonstrate that a wrong model is detected.
    """
    if base is None:
        params = scene.params()
        config = SimulationConfig(params, duration_s=duration_s, master_seed=seed or 0)
    else:
        params = scene.params(base.corcos)
        config = replace(base, corcos=params, duration_s=duration_s,
                         master_seed=base.master_seed if seed is None else seed)
    out = generate(config)
    estimate = estimate_coherence(out, config.window, params.fft_length)
    model = replace(params, alpha_longitudinal=params.alpha_longitudinal * model_alpha_scale,
                    alpha_lateral=params.alpha_lateral * model_alpha_scale)
    return evaluate(scene, estimate, model), estimate
