"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Input sizes follow one 600 s, 4-channel generation: 60 s chunks for the
recursive filter, one STFT block (512 frames x 1025 bins) for the per-bin
kernels.
"""
import argparse
import timeit

import numpy as np

from mcwind import _fallback
from mcwind.corcos import CorcosParams, coherence_matrices
from mcwind.single_channel import default_ar_coefficients, default_transition_matrix

try:
    from mcwind import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    x = rng.standard_normal(960_000)
    a = default_ar_coefficients()
    cum = np.ascontiguousarray(np.cumsum(default_transition_matrix(), axis=1))
    u = rng.random(60_000)
    gamma = np.ascontiguousarray(coherence_matrices(CorcosParams(0.02, 2.8, 0.0, num_channels=4))[1:])
    C, _ = _fallback.cholesky_upper(gamma)
    C = np.ascontiguousarray(C)
    X = np.ascontiguousarray(rng.standard_normal((4, 512, 1024)) + 1j * rng.standard_normal((4, 512, 1024)))
    return {
        "allpole_filter  960k samples, order 5": ("allpole_filter", (x, a)),
        "markov_states   60k frames": ("markov_states", (cum, 1, u)),
        "cholesky_upper  1024 bins, 4x4": ("cholesky_upper", (gamma,)),
        "mix_bins        4 ch x 512 frames x 1024 bins": ("mix_bins", (C, X)),
        "cross_spectra   4 ch x 512 frames x 1024 bins": ("cross_spectra", (X,)),
    }


def best_time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = [("python", _fallback)] + ([("compiled", _kernels)] if _kernels else [])
    if _kernels is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<48}" + "".join(f"{name:>12}" for name, _ in backends) + ("     speedup" if _kernels else ""))
    for label, (func, fargs) in cases(np.random.default_rng(0)).items():
        times = [best_time(getattr(mod, func), fargs, args.repeat) for _, mod in backends]
        row = f"{label:<48}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
