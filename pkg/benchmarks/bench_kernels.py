"""Time the compiled kernels against the pure-Python fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat R]``. Prints one line
per kernel with the best-of-R wall time of each backend and the speed-up.
Both backends are checked to produce the same result before timing.
"""
import argparse
import timeit

import numpy as np

from qsat import _pykernels
from qsat.sat import sample_instance
from qsat.solvers import WalksatLmParams, _Occurrences

try:
    from qsat import _ckernels
except ImportError:  # pragma: no cover - extension not built
    _ckernels = None


def cases(rng):
    inst = sample_instance(14, 8, 176.54, rng)
    psi = rng.normal(size=(8, 1 << 12)) + 1j * rng.normal(size=(8, 1 << 12))
    table = rng.normal(size=1 << 12) + 1j * rng.normal(size=1 << 12)
    walk_inst = sample_instance(200, 3, 4.0, rng)
    occ = _Occurrences(walk_inst)
    start = (rng.random(walk_inst.n) < 0.5).astype(np.uint8)
    uniforms = rng.random(3 * 2000)
    lm = WalksatLmParams()

    def walk(mod, mode):
        def run():
            assign = start.copy()
            out = mod.walk(walk_inst.k, walk_inst.vars, walk_inst.neg, occ.start, occ.clause,
                           assign, uniforms, 2000, mode, lm.p_noise, lm.w1, lm.w2)
            return out, assign
        return run

    def inplace(fn, data, *args):
        def run():
            buf = data.copy()
            fn(buf, *args)
            return buf
        return run

    return {
        "unsat_counts (n=14, m~1236)": lambda mod: (lambda: mod.unsat_counts(inst.n, inst.vars, inst.neg)),
        "apply_mixer (8 x 2^12)": lambda mod: inplace(mod.apply_mixer, psi, 12, 0.3),
        "sum_x (8 x 2^12)": lambda mod: (lambda: mod.sum_x(psi, 12)),
        "zeta_subset (2^12)": lambda mod: inplace(mod.zeta_subset, table, 12),
        "walk walksat (n=200, 2000 steps)": lambda mod: walk(mod, 0),
        "walk walksatlm (n=200, 2000 steps)": lambda mod: walk(mod, 1),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex), atol=1e-12)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled kernels are not built; run 'pip install -e . --no-build-isolation'")
    print(f"{'kernel':38s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speed-up':>9s}")
    for name, make in cases(np.random.default_rng(0)).items():
        py_fn, c_fn = make(_pykernels), make(_ckernels)
        if not same(py_fn(), c_fn()):
            raise SystemExit(f"{name}: backends disagree")
        number = 1 if "walk" in name else 3
        t_py = min(timeit.repeat(py_fn, number=number, repeat=args.repeat)) / number
        t_c = min(timeit.repeat(c_fn, number=number, repeat=args.repeat)) / number
        print(f"{name:38s} {1e3 * t_py:12.3f} {1e3 * t_c:12.3f} {t_py / t_c:8.1f}x")


if __name__ == "__main__":
    main()
