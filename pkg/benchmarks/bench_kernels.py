"""Compare the compiled and numpy polynomial kernels.

Run with ``python benchmarks/bench_kernels.py``. Times the raw sparse product
on dense-ish random polynomials and the full quadratization pipeline on
random models, once per available backend, and checks that both backends
return identical coefficients.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from loglaplace import _backend
from loglaplace.models import random_poly_model
from loglaplace.poly import Polynomial, poly_multiply
from loglaplace.quadratize import run_pipeline


def random_poly(rng, d, degree, order, density=0.6):
    from itertools import product
    exps = [e for e in product(range(degree + 1), repeat=d) if sum(e) <= degree]
    keep = [e for e in exps if rng.random() < density]
    coefs = rng.uniform(-1, 1, size=(len(keep), order + 1))
    return Polynomial(d, keep, coefs, order)


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    cases = [(2, 7, 3), (3, 7, 3), (4, 6, 3)]
    pairs = [(random_poly(rng, d, deg, L), random_poly(rng, d, deg, L), 2 * L + 1)
             for d, deg, L in cases]
    models = [random_poly_model(d, L, seed, 0.1).model for d, L, seed in ((2, 3, 1), (3, 3, 2))]

    print(f"backends available: {', '.join(_backend.BACKENDS)}")
    results = {}
    for name in _backend.BACKENDS:
        with _backend.use(name):
            for (p, q, cap), (d, deg, L) in zip(pairs, cases):
                t, prod = best_of(lambda: poly_multiply(p, q, cap, 2), args.repeat)
                results[(name, "mul", d)] = (t, prod)
                print(f"{name:7s} poly_mul d={d} terms={p.nterms}x{q.nterms}: {t * 1e3:8.2f} ms")
            for m in models:
                t, res = best_of(lambda: run_pipeline(m), args.repeat)
                results[(name, "pipe", m.d)] = (t, res)
                print(f"{name:7s} pipeline d={m.d} L={m.L}: {t * 1e3:8.2f} ms")
    if len(_backend.BACKENDS) == 2:
        for key in [k for k in results if k[0] == "cython"]:
            other = ("numpy",) + key[1:]
            tc, rc = results[key]
            tn, rn = results[other]
            if key[1] == "mul":
                same = rc == rn or rc.allclose(rn, rtol=1e-14)
            else:
                same = np.allclose(rc.coefficients, rn.coefficients, rtol=1e-13, atol=0)
            print(f"{key[1]} d={key[2]}: speedup {tn / tc:6.1f}x, outputs agree: {same}")


if __name__ == "__main__":
    main()
