"""Backend selection for the hot loops.

The compiled extension ``mcwind._kernels`` is used when it imports; otherwise
(or when ``MCWIND_PURE_PYTHON=1`` is set) the numpy/scipy versions in
``mcwind._fallback`` are used. ``BACKEND`` names the active one.
"""
import os

from . import _fallback

if os.environ.get("MCWIND_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

allpole_filter = _impl.allpole_filter
markov_states = _impl.markov_states
cholesky_upper = _impl.cholesky_upper
mix_bins = _impl.mix_bins
cross_spectra = _impl.cross_spectra

__all__ = [
    "BACKEND",
    "allpole_filter",
    "markov_states",
    "cholesky_upper",
    "mix_bins",
    "cross_spectra",
]
