import importlib

import numpy as np
import pytest

from mcwind import _fallback


def _backends():
    out = [pytest.param(_fallback, id="python")]
    try:
        out.append(pytest.param(importlib.import_module("mcwind._kernels"), id="compiled"))
    except ImportError:
        pass
    return out


BACKENDS = _backends()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
