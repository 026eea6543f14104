"""Pure-numpy reference implementations of the hot kernels.

Same signatures and results as the compiled ``_ckernels`` module; used when
the extension is not built or when ``FOLNERLAB_PURE_PYTHON`` is set.
"""

import numpy as np

_CHUNK = 4096


def conj_sum(unitaries, x):
    """Return ``sum_i U_i x U_i^dagger`` for a stack ``unitaries`` of shape (m, n, n)."""
    u = np.ascontiguousarray(unitaries, dtype=np.complex128)
    x = np.ascontiguousarray(x, dtype=np.complex128)
    out = np.zeros(x.shape, dtype=np.complex128)
    for start in range(0, u.shape[0], _CHUNK):
        block = u[start : start + _CHUNK]
        out += np.einsum("mij,mkj->ik", block @ x, block.conj(), optimize=True)
    return out


def adjoint_sum(unitaries):
    """Return ``sum_i U_i ⊗ conj(U_i)``, the superoperator of ``conj_sum`` on row-major vec."""
    u = np.ascontiguousarray(unitaries, dtype=np.complex128)
    m, n, _ = u.shape
    flat = u.reshape(m, n * n)
    # [(i,k),(j,l)] -> [(i,j),(k,l)]
    g = (flat.T @ flat.conj()).reshape(n, n, n, n)
    return np.ascontiguousarray(g.transpose(0, 2, 1, 3).reshape(n * n, n * n))
