"""Finite direct sums of full matrix algebras, their states, and operator norms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
from scipy.stats import unitary_group

__all__ = [
    "HERMITIAN_TOL",
    "PSD_TOL",
    "SignatureError",
    "NotHermitianError",
    "NotPositiveError",
    "BlockElement",
    "BlockState",
    "hermitian_part",
    "operator_norm",
    "is_psd",
    "state_eval",
    "norming_state",
    "pure_state",
    "maximally_mixed",
    "random_unitary",
    "random_hermitian",
    "random_positive",
    "random_density",
    "random_state",
]

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-9


class SignatureError(ValueError):
    """Block counts or block dimensions do not match."""


class NotHermitianError(ValueError):
    pass


class NotPositiveError(ValueError):
    pass


def _as_matrix(m) -> np.ndarray:
    a = np.array(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise SignatureError(f"expected a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


@dataclass(frozen=True, eq=False)
class BlockElement:
    """An element of ``M_{n_1} ⊕ ... ⊕ M_{n_r}``."""

    blocks: tuple[np.ndarray, ...]

    def __init__(self, blocks: Iterable):
        object.__setattr__(self, "blocks", tuple(_as_matrix(b) for b in blocks))
        if not self.blocks:
            raise SignatureError("a block element needs at least one block")

    @classmethod
    def identity(cls, dims: Sequence[int]) -> BlockElement:
        return cls(np.eye(n) for n in dims)

    @classmethod
    def zeros(cls, dims: Sequence[int]) -> BlockElement:
        return cls(np.zeros((n, n)) for n in dims)

    @classmethod
    def single(cls, m) -> BlockElement:
        return cls([m])

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(b.shape[0] for b in self.blocks)

    def check_dims(self, dims: Sequence[int]) -> None:
        if self.dims != tuple(dims):
            raise SignatureError(f"element has signature {self.dims}, expected {tuple(dims)}")

    def _same(self, other: BlockElement) -> None:
        if self.dims != other.dims:
            raise SignatureError(f"signature mismatch: {self.dims} vs {other.dims}")

    def adjoint(self) -> BlockElement:
        return BlockElement(b.conj().T for b in self.blocks)

    def __add__(self, other: BlockElement) -> BlockElement:
        self._same(other)
        return BlockElement(a + b for a, b in zip(self.blocks, other.blocks))

    def __sub__(self, other: BlockElement) -> BlockElement:
        self._same(other)
        return BlockElement(a - b for a, b in zip(self.blocks, other.blocks))

    def __matmul__(self, other: BlockElement) -> BlockElement:
        self._same(other)
        return BlockElement(a @ b for a, b in zip(self.blocks, other.blocks))

    def __mul__(self, c: complex) -> BlockElement:
        return BlockElement(c * b for b in self.blocks)

    __rmul__ = __mul__

    def __truediv__(self, c: complex) -> BlockElement:
        return BlockElement(b / c for b in self.blocks)

    def __neg__(self) -> BlockElement:
        return BlockElement(-b for b in self.blocks)

    def max_abs_diff(self, other: BlockElement) -> float:
        self._same(other)
        return max(float(np.abs(a - b).max()) for a, b in zip(self.blocks, other.blocks))

    def frobenius(self) -> float:
        return float(np.sqrt(sum(np.vdot(b, b).real for b in self.blocks)))

    def hermitian_residual(self) -> float:
        return max(float(np.abs(b - b.conj().T).max()) for b in self.blocks)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return self.hermitian_residual() <= tol

    def __repr__(self) -> str:
        return f"BlockElement(dims={self.dims})"


def hermitian_part(x: BlockElement) -> BlockElement:
    """``(x + x†)/2``; exactly Hermitian input comes back bit-identical."""
    return BlockElement((b + b.conj().T) / 2 for b in x.blocks)


@dataclass(frozen=True, eq=False)
class BlockState:
    """The state ``x -> sum_i w_i tr(s_i x_i)`` on a block algebra."""

    weights: np.ndarray
    densities: tuple[np.ndarray, ...]

    def __init__(self, weights: Iterable[float], densities: Iterable):
        w = np.array(list(weights), dtype=np.float64)
        dens = tuple(_as_matrix(d) for d in densities)
        if w.ndim != 1 or w.shape[0] != len(dens):
            raise SignatureError("one weight per density is required")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "densities", dens)

    @classmethod
    def from_weighted(cls, mats: Sequence[np.ndarray]) -> BlockState:
        """Build from unnormalized per-block positive parts ``w_i s_i``."""
        weights, dens = [], []
        for m in mats:
            m = _as_matrix(m)
            t = float(np.trace(m).real)
            weights.append(max(t, 0.0))
            n = m.shape[0]
            dens.append(m / t if t > 0 else np.eye(n) / n)
        total = sum(weights)
        return cls([w / total for w in weights], dens)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d.shape[0] for d in self.densities)

    def weighted(self) -> tuple[np.ndarray, ...]:
        """Per-block ``w_i s_i``; two states are equal iff these agree."""
        return tuple(w * d for w, d in zip(self.weights, self.densities))

    def distance(self, other: BlockState) -> float:
        if self.dims != other.dims:
            raise SignatureError(f"signature mismatch: {self.dims} vs {other.dims}")
        return max(float(np.abs(a - b).max()) for a, b in zip(self.weighted(), other.weighted()))

    def violations(self) -> list[str]:
        problems = []
        if np.any(self.weights < -HERMITIAN_TOL):
            problems.append("negative weight")
        if abs(self.weights.sum() - 1.0) > HERMITIAN_TOL:
            problems.append(f"weights sum to {self.weights.sum()!r}")
        for i, d in enumerate(self.densities):
            if np.abs(d - d.conj().T).max() > HERMITIAN_TOL:
                problems.append(f"density {i} not Hermitian")
                continue
            if np.linalg.eigvalsh((d + d.conj().T) / 2).min() < -PSD_TOL:
                problems.append(f"density {i} not positive")
            if abs(np.trace(d).real - 1.0) > 1e-10:
                problems.append(f"density {i} trace {np.trace(d).real!r}")
        return problems

    def is_valid(self) -> bool:
        return not self.violations()

    def __repr__(self) -> str:
        return f"BlockState(dims={self.dims}, weights={np.round(self.weights, 6).tolist()})"


def operator_norm(x: BlockElement) -> float:
    """Largest singular value over all blocks."""
    return max(float(scipy.linalg.svdvals(b)[0]) for b in x.blocks)


def is_psd(x: BlockElement, tol: float = PSD_TOL, herm_tol: float = HERMITIAN_TOL) -> bool:
    """True iff every block's smallest eigenvalue is at least ``-tol``.

    Raises :class:`NotHermitianError` for input that is not Hermitian within
    ``herm_tol``, so that "not positive" and "not self-adjoint" stay distinct.
    """
    r = x.hermitian_residual()
    if r > herm_tol:
        raise NotHermitianError(f"element is not Hermitian (residual {r:.3g})")
    h = hermitian_part(x)
    return all(float(np.linalg.eigvalsh(b)[0]) >= -tol for b in h.blocks)


def state_eval(s: BlockState, x: BlockElement) -> complex:
    if s.dims != x.dims:
        raise SignatureError(f"state on {s.dims} cannot evaluate element on {x.dims}")
    # tr(s x) = sum_ij s_ji x_ij
    return complex(sum(w * np.sum(d.T * b) for w, d, b in zip(s.weights, s.densities, x.blocks)))


def _top_eigvec(h: np.ndarray, rtol: float = 1e-12) -> tuple[float, np.ndarray]:
    """Top eigenvalue and a canonical unit vector of its eigenspace.

    The vector is the projection of the first standard basis vector that is
    not orthogonal to the (numerically) top eigenspace, so degenerate tops
    resolve the same way whatever basis ``eigh`` returns.
    """
    vals, vecs = np.linalg.eigh(h)
    top = float(vals[-1])
    space = vecs[:, vals >= top - rtol * max(1.0, abs(top))]
    proj = space @ space.conj().T
    j = int(np.argmax(np.linalg.norm(proj, axis=0) > 1e-6))
    v = proj[:, j] / np.linalg.norm(proj[:, j])
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    v *= np.conj(v[nz[0]]) / abs(v[nz[0]])
    return top, v


def pure_state(dims: Sequence[int], block: int, vector) -> BlockState:
    """Vector state on one block, weight zero elsewhere."""
    v = np.asarray(vector, dtype=np.complex128)
    v = v / np.linalg.norm(v)
    dens = [np.eye(n, dtype=np.complex128) / n for n in dims]
    dens[block] = np.outer(v, v.conj())
    weights = np.zeros(len(dims))
    weights[block] = 1.0
    return BlockState(weights, dens)


def maximally_mixed(dims: Sequence[int]) -> BlockState:
    total = sum(dims)
    return BlockState([n / total for n in dims], [np.eye(n) / n for n in dims])


def norming_state(x: BlockElement, tol: float = PSD_TOL) -> BlockState:
    """A pure state ``s`` with ``s(x) = ||x||`` for positive ``x``.

    Ties between blocks go to the lowest block index; within the block the
    top eigenspace is hit with the first standard basis vector that it does
    not annihilate (so ``x = 1`` gives ``e_1``), phased so the first nonzero
    entry is real and positive.
    """
    if not is_psd(x, tol=tol):
        raise NotPositiveError("norming_state needs a positive element")
    h = hermitian_part(x)
    tops = [_top_eigvec(b) for b in h.blocks]
    best = max(t[0] for t in tops)
    # lowest block index among those attaining the max up to rounding
    block = next(i for i, t in enumerate(tops) if t[0] >= best - 1e-13 * max(1.0, abs(best)))
    return pure_state(x.dims, block, tops[block][1])


# ---------------------------------------------------------------------------
# seeded samplers


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    if n == 1:
        return np.exp(2j * np.pi * rng.random()).reshape(1, 1)
    return unitary_group.rvs(n, random_state=rng)


def random_hermitian(dims: Sequence[int], rng: np.random.Generator, scale: float = 1.0) -> BlockElement:
    out = []
    for n in dims:
        g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        out.append(scale * (g + g.conj().T) / 2)
    return BlockElement(out)


def random_positive(dims: Sequence[int], rng: np.random.Generator, rank: int | None = None) -> BlockElement:
    out = []
    for n in dims:
        r = n if rank is None else min(rank, n)
        g = rng.normal(size=(n, r)) + 1j * rng.normal(size=(n, r))
        p = g @ g.conj().T / n
        out.append((p + p.conj().T) / 2)
    return BlockElement(out)


def random_density(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    p = g @ g.conj().T
    p = (p + p.conj().T) / 2
    return p / np.trace(p).real


def random_state(dims: Sequence[int], rng: np.random.Generator, support: Sequence[int] | None = None) -> BlockState:
    """Random state; ``support`` restricts the nonzero weights to those blocks."""
    idx = list(range(len(dims))) if support is None else list(support)
    w = np.zeros(len(dims))
    w[idx] = rng.dirichlet(np.ones(len(idx)))
    return BlockState(w, [random_density(n, rng) for n in dims])
