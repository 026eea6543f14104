"""Kernel dispatch between the compiled extension and the numpy fallback.

With the extension built, ``conj_sum`` on blocks of size at most
``COMPILED_MAX_N`` runs compiled (per-call numpy overhead dominates there);
larger blocks and ``adjoint_sum`` go to numpy, whose batched BLAS products
win (see ``benchmarks/bench_kernels.py``).  Set ``FOLNERLAB_PURE_PYTHON=1``
to force numpy everywhere.
"""

import importlib
import os

from folnerlab import _kernels_py

__all__ = ["BACKEND", "COMPILED_MAX_N", "conj_sum", "adjoint_sum", "available_backends", "get_backend"]


def _load_compiled():
    try:
        return importlib.import_module("folnerlab._ckernels")
    except ImportError:
        return None


_compiled = None if os.environ.get("FOLNERLAB_PURE_PYTHON") else _load_compiled()
BACKEND = "cython" if _compiled is not None else "python"
COMPILED_MAX_N = 4


def conj_sum(unitaries, x):
    """``sum_i U_i x U_i^dagger`` over a stack of shape (m, n, n)."""
    if _compiled is not None and x.shape[0] <= COMPILED_MAX_N:
        return _compiled.conj_sum(unitaries, x)
    return _kernels_py.conj_sum(unitaries, x)


adjoint_sum = _kernels_py.adjoint_sum


def available_backends():
    names = ["python"]
    if _load_compiled() is not None:
        names.append("cython")
    return names


def get_backend(name):
    if name == "python":
        return _kernels_py
    if name == "cython":
        mod = _load_compiled()
        if mod is None:
            raise ImportError("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        return mod
    raise ValueError(f"unknown kernel backend {name!r}")
