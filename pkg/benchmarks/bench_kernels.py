"""Benchmark: compiled Cython kernels vs the pure-numpy fallback.

Run:  python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from rpfcone.dynamics import DoublingMap, IntermittentMap
from rpfcone.potentials import ConstantPotential, GeometricPotential
from rpfcone.transfer import DiscretizedOperator, power_iterate
from rpfcone.kernels import _core, _ref  # noqa: F401  (import failure = no ext built)


def bench(label, fn, repeats=3):
    best = min(_timed(fn) for _ in range(repeats))
    print(f"  {label:<44s} {best * 1e3:10.1f} ms")
    return best


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args()
    samples = 2000 if args.quick else 20000
    steps = 500 if args.quick else 2000

    rng = np.random.default_rng(0)
    obs = np.cos(2 * np.pi * (np.arange(4096) + 0.5) / 4096)

    for pmap, pot in ((DoublingMap(), ConstantPotential(0.0)),
                      (IntermittentMap(0.5), None)):
        pot = pot or GeometricPotential(pmap, 0.1)
        op = DiscretizedOperator(pmap, pot, 4096)
        data = power_iterate(op)
        code, params = pmap.kernel_params()
        weights = np.exp(pot(op.centers))
        h = np.ascontiguousarray(data.h.values)
        anchors = rng.random(samples)
        print(f"{pmap.family}: backward chain, {samples} orbits x {steps} steps")
        for name, mod in (("cython", _core), ("numpy fallback", _ref)):
            bench(f"backward_birkhoff_sums [{name}]",
                  lambda m=mod: m.backward_birkhoff_sums(
                      code, params, weights, h, anchors, 64, steps, obs, 7))
        print(f"{pmap.family}: expansion trace, 1 orbit x {200 * steps} steps")
        for name, mod in (("cython", _core), ("numpy fallback", _ref)):
            bench(f"log_inv_deriv_trace [{name}]",
                  lambda m=mod: m.log_inv_deriv_trace(code, params, 0.37, 200 * steps))


if __name__ == "__main__":
    main()
