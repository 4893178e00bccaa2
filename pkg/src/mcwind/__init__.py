"""Multichannel wind noise synthesis with Corcos spatial coherence."""
from .analysis import CoherenceEstimate, coherence_report, estimate_coherence, nmse, pair_error
from .corcos import CorcosParams, build_matrix_set, coherence_matrices, coherence_matrix, coherence_pair
from .dsp import MultichannelBuffer, SpectralFrames, WindowSpec, istft, stft
from .errors import ArgumentError, ConfigurationError, ModelError, WindNoiseError
from .kernels import BACKEND
from .multichannel import SimulationConfig, apply_spatial_mixing, generate
from .single_channel import ExcitationCodebook, GainModel, generate_single_channel

__all__ = [
    "BACKEND", "ArgumentError", "CoherenceEstimate", "ConfigurationError", "CorcosParams",
    "ExcitationCodebook", "GainModel", "ModelError", "MultichannelBuffer", "SimulationConfig",
    "SpectralFrames", "WindNoiseError", "WindowSpec", "apply_spatial_mixing", "build_matrix_set",
    "coherence_matrices", "coherence_matrix", "coherence_pair", "coherence_report",
    "estimate_coherence", "generate", "generate_single_channel", "istft", "nmse", "pair_error", "stft",
]
__version__ = "0.1.0"
