"""The ergodic maximum ``m(a | K) = sup_{phi in K} phi(a)`` over invariant states.

Two backends:

``fixed_point``
    ``m(a | S^G) = ||E(a)||`` with ``E`` the fixed-point projection from
    :mod:`folnerlab.dynamics`; the witness is ``psi ∘ E`` for a norming
    state ``psi`` of ``E(a)``.
``frank_wolfe``
    conditional gradient over invariant densities, parametrized by a real
    Hermitian basis of the invariant subspace computed here independently.

Constraint ``annihilator`` (states vanishing on ``ker iota``) is solved on
the quotient model and pulled back; ``full`` ranges over all invariant states
of the domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from folnerlab.cstar import CStarModel, apply_iota, project, pullback_state, quotient_model
from folnerlab.dynamics import Action, WStarSystem, FIXED_SPACE_RTOL, ProjectionAmbiguityError
from folnerlab.matrix import (
    BlockElement,
    BlockState,
    NotPositiveError,
    is_psd,
    norming_state,
    operator_norm,
    random_state,
    state_eval,
)

__all__ = [
    "ConvergenceError",
    "InvariantSubspace",
    "MaxResult",
    "invariant_subspace",
    "maximizing_state",
    "invariant_state_from",
    "sample_invariant_states",
    "m_value",
    "sdp_cross_check",
]


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, gap: float, iterations: int):
        super().__init__(msg)
        self.gap = gap
        self.iterations = iterations


# beyond this block size the real basis is taken from the *-closure of the complex fixed space
REAL_BASIS_MAX_DIM = 16


def _hermitian_basis(n: int) -> np.ndarray:
    """HS-orthonormal real basis of ``n x n`` Hermitian matrices, shape ``(n*n, n, n)``."""
    out = []
    for j in range(n):
        e = np.zeros((n, n), dtype=np.complex128)
        e[j, j] = 1
        out.append(e)
    s = 1 / np.sqrt(2)
    for j in range(n):
        for l in range(j + 1, n):
            e = np.zeros((n, n), dtype=np.complex128)
            e[j, l] = e[l, j] = s
            out.append(e)
            f = np.zeros((n, n), dtype=np.complex128)
            f[j, l] = -1j * s
            f[l, j] = 1j * s
            out.append(f)
    return np.array(out)


def _coords(basis: np.ndarray, h: np.ndarray) -> np.ndarray:
    # <B, h> = tr(B h), real for Hermitian B and h
    return np.einsum("mji,ij->m", basis, h).real


@dataclass
class InvariantSubspace:
    """Per block, an HS-orthonormal Hermitian basis of the fixed space (shape ``(r, n, n)``)."""

    bases: list[np.ndarray]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(b.shape[0] for b in self.bases)

    def project_hermitian(self, b: int, h: np.ndarray) -> np.ndarray:
        basis = self.bases[b]
        if basis.shape[0] == 0:
            return np.zeros_like(h)
        return np.einsum("m,mij->ij", _coords(basis, h), basis)

    def project(self, x: BlockElement) -> BlockElement:
        out = []
        for b, m in enumerate(x.blocks):
            re = (m + m.conj().T) / 2
            im = (m - m.conj().T) / 2j
            out.append(self.project_hermitian(b, re) + 1j * self.project_hermitian(b, im))
        return BlockElement(out)

    def orthonormality_residual(self) -> float:
        worst = 0.0
        for basis in self.bases:
            r = basis.shape[0]
            if r:
                gram = np.einsum("aij,bji->ab", basis, basis).real
                worst = max(worst, float(np.abs(gram - np.eye(r)).max()))
        return worst


def _real_coords(h: np.ndarray) -> np.ndarray:
    """HS-isometric real coordinates of Hermitian matrices ``(..., n, n) -> (..., n*n)``."""
    n = h.shape[-1]
    iu = np.triu_indices(n, 1)
    d = np.diagonal(h, axis1=-2, axis2=-1).real
    up = h[..., iu[0], iu[1]] * np.sqrt(2)
    return np.concatenate([d, up.real, up.imag], axis=-1)


def _from_real_coords(c: np.ndarray, n: int) -> np.ndarray:
    iu = np.triu_indices(n, 1)
    m = len(iu[0])
    out = np.zeros(c.shape[:-1] + (n, n), dtype=np.complex128)
    idx = np.arange(n)
    out[..., idx, idx] = c[..., :n]
    up = (c[..., n : n + m] + 1j * c[..., n + m :]) / np.sqrt(2)
    out[..., iu[0], iu[1]] = up
    out[..., iu[1], iu[0]] = up.conj()
    return out


def _hermitian_closure(vecs: np.ndarray, n: int, rtol: float) -> np.ndarray:
    """Real orthonormal Hermitian basis of a *-closed subspace given by complex ``vec`` columns."""
    mats = vecs.T.reshape(-1, n, n)
    herm = np.concatenate([(mats + mats.conj().transpose(0, 2, 1)) / 2, (mats - mats.conj().transpose(0, 2, 1)) / 2j])
    u, sv, _ = scipy.linalg.svd(_real_coords(herm).T, full_matrices=False)
    rank = int(np.sum(sv > rtol * max(float(sv[0]), 1.0))) if sv.size else 0
    return _from_real_coords(u[:, :rank].T, n)


def invariant_subspace(sys: Action | WStarSystem, rtol: float = FIXED_SPACE_RTOL) -> InvariantSubspace:
    """Solve ``U s U† = s`` for all generators over Hermitian ``s``, block by block.

    The real-linear constraint map is written in the real Hermitian basis and
    its null space taken from a real SVD with a relative threshold.
    """
    action = sys.action if isinstance(sys, WStarSystem) else sys
    bases = []
    for b, n in enumerate(action.dims):
        if n > REAL_BASIS_MAX_DIM:
            bases.append(_hermitian_closure(action.projector.bases[b], n, rtol))
            continue
        herm = _hermitian_basis(n)
        rows = []
        for gen in action.generator_unitaries:
            u = gen[b]
            cols = [_coords(herm, u @ h @ u.conj().T - h) for h in herm]
            rows.append(np.array(cols).T)
        if not rows:
            bases.append(herm)
            continue
        _, sv, vt = scipy.linalg.svd(np.vstack(rows))
        cut = rtol * max(float(sv[0]), 1.0)
        near = sv[(sv > cut / 100) & (sv < cut * 100)]
        if near.size:
            raise ProjectionAmbiguityError(f"block {b}: singular values {near.tolist()} near the cut {cut:.1e}")
        rank = int(np.sum(sv > cut))
        null = vt[rank:]
        bases.append(np.einsum("rm,mij->rij", null, herm))
    return InvariantSubspace(bases)


@dataclass
class MaxResult:
    value: float
    witness: BlockState
    method: str
    residuals: dict[str, float] = field(default_factory=dict)
    iterations: int = 0


def invariant_state_from(action: Action, psi: BlockState) -> BlockState:
    """``psi ∘ E``: densities replaced by their fixed-point projections."""
    proj = action.projector
    dens = proj(BlockElement(psi.densities))
    return BlockState(psi.weights, [(d + d.conj().T) / 2 for d in dens.blocks])


def maximizing_state(sys: Action | WStarSystem, a: BlockElement) -> BlockState:
    """An invariant state attaining ``m(a | S^G)``: ``norming_state(E a) ∘ E``."""
    action = sys.action if isinstance(sys, WStarSystem) else sys
    ea = action.projector(a)
    return invariant_state_from(action, norming_state(ea))


def _residuals(action: Action, witness: BlockState, a: BlockElement, value: float) -> dict[str, float]:
    return {
        "invariance": action.state_pullback_residual(witness),
        "value": abs(state_eval(witness, a).real - value),
        "state": float(len(witness.violations())),
    }


def _fixed_point(action: Action, a: BlockElement) -> MaxResult:
    ea = action.projector(a)
    value = operator_norm(ea)
    witness = invariant_state_from(action, norming_state(ea))
    res = _residuals(action, witness, a, value)
    res["certificate_gap"] = abs(value - state_eval(witness, a).real)
    return MaxResult(value, witness, "fixed_point", res)


def _frank_wolfe(action: Action, a: BlockElement, max_iter: int, gap_tol: float) -> MaxResult:
    sub = invariant_subspace(action)
    dims = action.dims
    total = sum(dims)
    grad = [sub.project_hermitian(b, (m + m.conj().T) / 2) for b, m in enumerate(a.blocks)]
    # iterate: per-block w_i s_i, starting from the (invariant) normalized trace
    cur = [np.eye(n, dtype=np.complex128) / total for n in dims]
    gap = np.inf
    it = 0
    for it in range(max_iter + 1):
        tops = [scipy.linalg.eigh(g, subset_by_index=[g.shape[0] - 1, g.shape[0] - 1]) for g in grad]
        lam = [float(t[0][0]) for t in tops]
        blk = int(np.argmax(lam))
        v = tops[blk][1][:, 0]
        val = sum(float(np.sum(g.T * c).real) for g, c in zip(grad, cur))
        gap = lam[blk] - val
        if gap <= gap_tol or it == max_iter:
            break
        vertex = [np.zeros((n, n), dtype=np.complex128) for n in dims]
        vertex[blk] = sub.project_hermitian(blk, np.outer(v, v.conj()))
        step = 2.0 / (it + 2.0)
        cur = [(1 - step) * c + step * p for c, p in zip(cur, vertex)]
    if gap > gap_tol:
        raise ConvergenceError(f"Frank-Wolfe stopped after {it} iterations with gap {gap:.3g}", gap, it)
    witness = BlockState.from_weighted([(c + c.conj().T) / 2 for c in cur])
    value = state_eval(witness, a).real
    res = _residuals(action, witness, a, value)
    res["duality_gap"] = float(gap)
    return MaxResult(float(value), witness, "frank_wolfe", res, iterations=it)


def sdp_cross_check(
    sys: Action | WStarSystem, a: BlockElement, max_iter: int = 500, gap_tol: float = 1e-9
) -> MaxResult:
    """``m(a | S^G)`` by conditional gradient over the invariant spectrahedron.

    The linear maximization step takes the top eigenvector of the gradient
    projected onto the invariant subspace and projects the resulting vertex
    back into it; the step size is ``2 / (t + 2)``.
    """
    action = sys.action if isinstance(sys, WStarSystem) else sys
    a.check_dims(action.dims)
    return _frank_wolfe(action, a, max_iter, gap_tol)


def m_value(
    model: CStarModel,
    a: BlockElement,
    constraint: str = "annihilator",
    backend: str = "fixed_point",
) -> MaxResult:
    """``m(a | Ann(ker iota))`` (``constraint="annihilator"``) or ``m(a | S^G)`` (``"full"``).

    The annihilator problem is solved on the quotient and its witness pulled
    back to ``A``.  With the fixed-point backend the quotient problem is
    posed on ``M`` itself (``||E(iota(a))||``); the Frank-Wolfe backend uses
    the quotient's induced action.
    """
    a.check_dims(model.dims)
    if not is_psd(a):
        raise NotPositiveError("m_value needs a positive element")
    if constraint == "full":
        action, elem = model.theta, a
    elif constraint == "annihilator":
        if backend == "fixed_point":
            action, elem = model.target.action, apply_iota(model, a)
        else:
            action, elem = quotient_model(model).theta, project(model, a)
    else:
        raise ValueError(f"unknown constraint {constraint!r}")
    if backend == "fixed_point":
        res = _fixed_point(action, elem)
    elif backend == "frank_wolfe":
        res = sdp_cross_check(action, elem)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if constraint == "annihilator":
        res.witness = pullback_state(model, res.witness)
        res.residuals["invariance"] = model.theta.state_pullback_residual(res.witness)
        res.residuals["value"] = abs(state_eval(res.witness, a).real - res.value)
    return res


def sample_invariant_states(
    action: Action, rng: np.random.Generator, count: int, support: Sequence[int] | None = None
) -> list[BlockState]:
    """Random invariant states: random states pushed through ``E``."""
    return [invariant_state_from(action, random_state(action.dims, rng, support)) for _ in range(count)]
