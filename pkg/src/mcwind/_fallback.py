"""numpy/scipy implementations of the kernels in ``_kernels.pyx``.

Same signatures and semantics as the compiled versions. Results agree to
floating-point roundoff, not bit for bit (summation order differs).
"""
import numpy as np
from scipy.signal import lfilter


def allpole_filter(x, a):
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    return lfilter([1.0], np.concatenate(([1.0], a)), x)


def markov_states(cumulative, initial, uniforms):
    cumulative = np.asarray(cumulative, dtype=np.float64)
    uniforms = np.asarray(uniforms, dtype=np.float64)
    n_states = cumulative.shape[0]
    states = np.empty(uniforms.shape[0], dtype=np.int64)
    if uniforms.shape[0] == 0:
        return states
    # row-wise lookup tables; searchsorted(side="right") == first s with u < cum[s]
    rows = [cumulative[s, : n_states - 1] for s in range(n_states)]
    prev = int(initial)
    states[0] = prev
    for f in range(1, uniforms.shape[0]):
        prev = int(np.searchsorted(rows[prev], uniforms[f], side="right"))
        states[f] = prev
    return states


def cholesky_upper(A):
    A = np.asarray(A, dtype=np.complex128)
    n_batch, n, _ = A.shape
    C = np.zeros_like(A)
    ok = np.ones(n_batch, dtype=bool)
    try:
        lower = np.linalg.cholesky(A)
        return np.ascontiguousarray(np.conj(np.swapaxes(lower, -1, -2))), ok
    except np.linalg.LinAlgError:
        pass
    for b in range(n_batch):
        try:
            C[b] = np.conj(np.linalg.cholesky(A[b]).T)
        except np.linalg.LinAlgError:
            ok[b] = False
    return C, ok


def mix_bins(C, X):
    return np.einsum("kmi,mlk->ilk", np.conj(C), X)


def cross_spectra(X):
    return np.einsum("ilk,jlk->ijk", X, np.conj(X))
