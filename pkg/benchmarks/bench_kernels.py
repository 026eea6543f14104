"""Compiled vs numpy kernels on the stacks the Følner sums produce.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per (kernel, stack size, block size) with the best time of
each backend and the speedup, then an end-to-end Heisenberg sweep run in a
subprocess per backend.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from folnerlab import kernels
from folnerlab.matrix import random_unitary

CASES = [(64, 2), (1024, 2), (16384, 2), (1024, 4), (4096, 8), (256, 32), (64, 64)]

E2E = """
import time
from folnerlab.config import load_config
from folnerlab.harness import suite_lipschitz
from folnerlab.kernels import BACKEND
from folnerlab.systems import bundled_path
cfg = load_config(bundled_path("heisenberg_m4"))
t = time.perf_counter()
suite_lipschitz(cfg, 120)
print(BACKEND, time.perf_counter() - t)
"""


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    names = kernels.available_backends()
    if "cython" not in names:
        print("compiled kernels not built; only the numpy backend is available")
    impls = {n: kernels.get_backend(n) for n in names}
    rng = np.random.default_rng(0)
    print(f"{'kernel':<12}{'m':>7}{'n':>4}" + "".join(f"{n:>12}" for n in names) + "   speedup")
    for m, n in CASES:
        us = np.array([random_unitary(n, rng) for _ in range(m)])
        x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        for kname, call in (("conj_sum", lambda k: k.conj_sum(us, x)), ("adjoint_sum", lambda k: k.adjoint_sum(us))):
            if kname == "adjoint_sum" and n > 16:
                continue
            t = {name: bench(lambda: call(impl), args.repeat) for name, impl in impls.items()}
            speed = t["python"] / t["cython"] if "cython" in t else float("nan")
            print(f"{kname:<12}{m:>7}{n:>4}" + "".join(f"{t[k] * 1e3:>10.3f}ms" for k in names) + f"   {speed:6.2f}x")
    print("\nend to end: defect-Lipschitz suite, Heisenberg on M4, k <= 120")
    for name in names:
        env = dict(os.environ)
        if name == "python":
            env["FOLNERLAB_PURE_PYTHON"] = "1"
        out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"  {backend:<8}{float(secs):8.2f}s")


if __name__ == "__main__":
    main()
