# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Every function here has a drop-in twin in ``mcwind._fallback`` with the same
signature and semantics. ``mcwind.kernels`` picks one at import time.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

cdef extern from "complex.h" nogil:
    double complex conj(double complex)
    double creal(double complex)
    double cimag(double complex)


def allpole_filter(const double[::1] x, const double[::1] a):
    """y[n] = x[n] - sum_m a[m-1] y[n-m], zero initial state."""
    cdef Py_ssize_t n_samples = x.shape[0]
    cdef Py_ssize_t order = a.shape[0]
    cdef Py_ssize_t n, m
    cdef double acc
    out = np.empty(n_samples, dtype=np.float64)
    cdef double[::1] y = out
    with nogil:
        for n in range(n_samples):
            acc = x[n]
            for m in range(1, order + 1):
                if n - m < 0:
                    break
                acc = acc - a[m - 1] * y[n - m]
            y[n] = acc
    return out


def markov_states(const double[:, ::1] cumulative, Py_ssize_t initial,
                  const double[::1] uniforms):
    """Walk a chain; states[0] = initial, states[f] drawn with uniforms[f]."""
    cdef Py_ssize_t n_frames = uniforms.shape[0]
    cdef Py_ssize_t n_states = cumulative.shape[0]
    cdef Py_ssize_t f, s, prev
    out = np.empty(n_frames, dtype=np.int64)
    cdef long long[::1] states = out
    if n_frames == 0:
        return out
    with nogil:
        states[0] = initial
        prev = initial
        for f in range(1, n_frames):
            s = 0
            while s < n_states - 1 and uniforms[f] >= cumulative[prev, s]:
                s += 1
            states[f] = s
            prev = s
    return out


def cholesky_upper(const double complex[:, :, ::1] A):
    """Batched upper Cholesky, A[b] = C[b]^H C[b].

    Returns ``(C, ok)``; bins whose pivots are not strictly positive have
    ``ok[b] = False`` and an unspecified ``C[b]``.
    """
    cdef Py_ssize_t n_batch = A.shape[0]
    cdef Py_ssize_t n = A.shape[1]
    cdef Py_ssize_t b, i, j, m
    cdef double pivot
    cdef double complex acc
    C_arr = np.zeros((n_batch, n, n), dtype=np.complex128)
    ok_arr = np.ones(n_batch, dtype=np.bool_)
    cdef double complex[:, :, ::1] C = C_arr
    cdef cnp.npy_bool[::1] ok = ok_arr
    with nogil:
        for b in range(n_batch):
            for j in range(n):
                pivot = creal(A[b, j, j])
                for m in range(j):
                    pivot = pivot - (creal(C[b, m, j]) * creal(C[b, m, j])
                                     + cimag(C[b, m, j]) * cimag(C[b, m, j]))
                if not pivot > 0.0:
                    ok[b] = False
                    break
                pivot = sqrt(pivot)
                C[b, j, j] = pivot
                for i in range(j + 1, n):
                    acc = A[b, j, i]
                    for m in range(j):
                        acc = acc - conj(C[b, m, j]) * C[b, m, i]
                    C[b, j, i] = acc / pivot
    return C_arr, ok_arr


def mix_bins(const double complex[:, :, ::1] C, const double complex[:, :, ::1] X):
    """Y[i, l, k] = sum_m conj(C[k, m, i]) X[m, l, k], i.e. C(k)^H applied per bin."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t n_frames = X.shape[1]
    cdef Py_ssize_t n_bins = X.shape[2]
    cdef Py_ssize_t i, m, l, k
    Y_arr = np.zeros((n, n_frames, n_bins), dtype=np.complex128)
    Ch_arr = np.ascontiguousarray(np.conj(np.transpose(np.asarray(C), (2, 1, 0))))
    cdef double complex[:, :, ::1] Y = Y_arr
    # Ch[i, m, k] = conj(C[k, m, i]) keeps the inner loop contiguous in k
    cdef double complex[:, :, ::1] Ch = Ch_arr
    with nogil:
        for i in range(n):
            for m in range(n):
                for l in range(n_frames):
                    for k in range(n_bins):
                        Y[i, l, k] = Y[i, l, k] + Ch[i, m, k] * X[m, l, k]
    return Y_arr


def cross_spectra(const double complex[:, :, ::1] X):
    """S[i, j, k] = sum_l X[i, l, k] conj(X[j, l, k])."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t n_frames = X.shape[1]
    cdef Py_ssize_t n_bins = X.shape[2]
    cdef Py_ssize_t i, j, l, k
    cdef double complex acc
    S_arr = np.zeros((n, n, n_bins), dtype=np.complex128)
    cdef double complex[:, :, ::1] S = S_arr
    with nogil:
        for i in range(n):
            for j in range(i, n):
                for l in range(n_frames):
                    for k in range(n_bins):
                        S[i, j, k] = S[i, j, k] + X[i, l, k] * conj(X[j, l, k])
        for i in range(n):
            for j in range(i):
                for k in range(n_bins):
                    S[i, j, k] = conj(S[j, i, k])
    return S_arr
