"""Unitarily implemented group actions, Følner averages, and the fixed-point projection.

An :class:`Action` lets a group act on ``M_{n_1} ⊕ ... ⊕ M_{n_r}`` by
``x -> U_g x U_g†`` blockwise.  A :class:`WStarSystem` adds a faithful
invariant state.  Følner averages are sums of conjugations over ``F_k``,
evaluated factor by factor (``F_k = A_1 ... A_r``), so that

    sum_{g in F_k} Ad(U_g) = (sum_{a in A_1} Ad(U_a)) ∘ ... ∘ (sum_{a in A_r} Ad(U_a)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from folnerlab import kernels
from folnerlab.groups import (
    FolnerFamily,
    GroupElement,
    GroupModel,
    HeisenbergGroup,
    Word,
    ZdGroup,
)
from folnerlab.matrix import (
    BlockElement,
    BlockState,
    SignatureError,
    hermitian_part,
    operator_norm,
)

__all__ = [
    "ValidationError",
    "ProjectionAmbiguityError",
    "Check",
    "ValidationReport",
    "ActionEvaluator",
    "Action",
    "WStarSystem",
    "FixedPointProjector",
    "fixed_basis",
    "fixed_basis_dense",
    "AverageSweep",
    "validate_system",
    "act",
    "ergodic_average",
    "norm_sequence",
    "mean_ergodic_projection",
    "UNITARY_TOL",
    "RELATION_TOL",
    "FIXED_SPACE_RTOL",
]

UNITARY_TOL = 1e-10
INVARIANCE_TOL = 1e-10
FAITHFUL_MIN_EIG = 1e-8
RELATION_TOL = 1e-8
FIXED_SPACE_RTOL = 1e-8
# superoperators are n^2 x n^2; beyond this block size averages are summed directly
SUPEROP_MAX_DIM = 16


class ValidationError(ValueError):
    pass


class ProjectionAmbiguityError(RuntimeError):
    """Singular values of the fixed-point system sit too close to the rank cut."""


@dataclass
class Check:
    name: str
    residual: float
    tol: float
    where: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tol)


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def worst(self, name: str) -> float:
        return max((c.residual for c in self.checks if c.name == name), default=0.0)

    def raise_if_failed(self) -> None:
        bad = self.failures()
        if bad:
            msg = "; ".join(f"{c.name} [{c.where}] residual {c.residual:.3g} > {c.tol:.1g}" for c in bad)
            raise ValidationError(msg)

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checks": [
                {"name": c.name, "where": c.where, "residual": c.residual, "tol": c.tol, "passed": c.passed}
                for c in self.checks
            ],
        }


def _power_table(u: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Stack of ``u^e`` for ``e = lo .. hi`` (inclusive), built by repeated multiplication."""
    n = u.shape[0]
    out = np.empty((hi - lo + 1, n, n), dtype=np.complex128)
    out[-lo] = np.eye(n)
    for e in range(1, hi + 1):
        out[e - lo] = out[e - 1 - lo] @ u
    ui = u.conj().T
    for e in range(-1, lo - 1, -1):
        out[e - lo] = out[e + 1 - lo] @ ui
    return out


class ActionEvaluator:
    """Maps group elements to block unitaries.

    ``Z^d`` and Heisenberg elements are evaluated from power tables of the
    generators (and of the central commutator), vectorized over stacks of
    elements; finite-group elements follow their spanning-tree word, memoized
    per element.
    """

    def __init__(self, group: GroupModel, gens: Sequence[Sequence[np.ndarray]]):
        self.group = group
        self.gens = gens
        self.nblocks = len(gens[0]) if gens else 0
        self._memo: dict[tuple[int, ...], tuple[np.ndarray, ...]] = {}
        self._tables: dict[tuple[int, int], tuple[int, np.ndarray]] = {}
        if isinstance(group, HeisenbergGroup):
            x, y = gens
            self._basis = [list(x), list(y), [a @ b @ a.conj().T @ b.conj().T for a, b in zip(x, y)]]
        elif isinstance(group, ZdGroup):
            self._basis = [list(g) for g in gens]
        else:
            self._basis = None

    def _exponents(self, elements: Sequence[GroupElement]) -> np.ndarray:
        coords = np.array([g.coords for g in elements], dtype=np.int64).reshape(len(elements), -1)
        if isinstance(self.group, HeisenbergGroup):
            return np.stack([coords[:, 0], coords[:, 1], coords[:, 2] - coords[:, 0] * coords[:, 1]], axis=1)
        return coords

    def _table(self, basis: int, block: int, lo: int, hi: int) -> tuple[int, np.ndarray]:
        key = (basis, block)
        have = self._tables.get(key)
        if have is not None:
            off, tab = have
            if -off <= lo and tab.shape[0] - off - 1 >= hi:
                return have
            # grow geometrically so incremental sweeps rebuild O(log) times
            span = tab.shape[0]
            lo = min(lo, -off, -off - span if lo < -off else -off)
            hi = max(hi, tab.shape[0] - off - 1, span - off - 1 + span if hi > span - off - 1 else 0)
        tab = _power_table(self._basis[basis][block], min(lo, 0), max(hi, 0))
        have = (-min(lo, 0), tab)
        self._tables[key] = have
        return have

    def word(self, word: Word) -> tuple[np.ndarray, ...]:
        out = []
        for b in range(self.nblocks):
            n = self.gens[0][b].shape[0]
            m = np.eye(n, dtype=np.complex128)
            for i, e in word:
                u = self.gens[i][b]
                p = u if e >= 0 else u.conj().T
                m = m @ np.linalg.matrix_power(p, abs(e))
            out.append(m)
        return tuple(out)

    def unitary(self, g: GroupElement) -> tuple[np.ndarray, ...]:
        self.group._own(g)
        hit = self._memo.get(g.coords)
        if hit is None:
            hit = tuple(s[0] for s in self.stack([g]))
            if len(self._memo) < 100_000:
                self._memo[g.coords] = hit
        return hit

    def stack(self, elements: Sequence[GroupElement]) -> list[np.ndarray]:
        """Per block, an array of shape ``(len(elements), n, n)`` of unitaries."""
        if self._basis is None:
            return self._stack_words(elements)
        exps = self._exponents(elements)
        out = []
        for b in range(self.nblocks):
            acc = None
            for j in range(exps.shape[1]):
                col = exps[:, j]
                off, tab = self._table(j, b, int(col.min()), int(col.max()))
                part = tab[col + off]
                acc = part if acc is None else acc @ part
            out.append(acc)
        return out

    def _stack_words(self, elements):
        mats = []
        for g in elements:
            hit = self._memo.get(g.coords)
            if hit is None:
                hit = self.word(self.group.normal_form_word(g))
                self._memo[g.coords] = hit
            mats.append(hit)
        return [np.stack([m[b] for m in mats]) for b in range(self.nblocks)]


class Action:
    """A group acting on a block algebra by blockwise unitary conjugation.

    ``generator_unitaries[i][b]`` implements generator ``i`` on block ``b``.
    """

    def __init__(
        self,
        group: GroupModel,
        folner: FolnerFamily,
        dims: Sequence[int],
        generator_unitaries: Sequence[Sequence],
    ):
        self.group = group
        self.folner = folner
        self.dims = tuple(int(n) for n in dims)
        gens = []
        if len(generator_unitaries) != len(group.generators):
            raise SignatureError(
                f"{len(group.generators)} generators need unitaries, got {len(generator_unitaries)}"
            )
        for i, per_block in enumerate(generator_unitaries):
            if len(per_block) != len(self.dims):
                raise SignatureError(f"generator {i}: expected {len(self.dims)} blocks, got {len(per_block)}")
            mats = []
            for b, (u, n) in enumerate(zip(per_block, self.dims)):
                u = np.array(u, dtype=np.complex128)
                if u.shape != (n, n):
                    raise SignatureError(f"generator {i} block {b}: shape {u.shape}, expected {(n, n)}")
                mats.append(u)
            gens.append(tuple(mats))
        self.generator_unitaries = tuple(gens)
        self.evaluator = ActionEvaluator(group, self.generator_unitaries)

    def restrict(self, blocks: Sequence[int]) -> Action:
        blocks = list(blocks)
        return Action(
            self.group,
            self.folner,
            [self.dims[b] for b in blocks],
            [[g[b] for b in blocks] for g in self.generator_unitaries],
        )

    def unitary(self, g: GroupElement) -> tuple[np.ndarray, ...]:
        return self.evaluator.unitary(g)

    def act(self, g: GroupElement, x: BlockElement) -> BlockElement:
        x.check_dims(self.dims)
        us = self.unitary(g)
        return BlockElement(u @ b @ u.conj().T for u, b in zip(us, x.blocks))

    def act_generator(self, i: int, x: BlockElement) -> BlockElement:
        return BlockElement(u @ b @ u.conj().T for u, b in zip(self.generator_unitaries[i], x.blocks))

    def state_pullback_residual(self, s: BlockState) -> float:
        """Largest ``||U s_i U† - s_i||_F`` over generators and blocks (weighted densities)."""
        worst = 0.0
        for gen in self.generator_unitaries:
            for u, d in zip(gen, s.weighted()):
                worst = max(worst, float(np.linalg.norm(u @ d @ u.conj().T - d)))
        return worst

    @cached_property
    def projector(self) -> FixedPointProjector:
        return FixedPointProjector(self)

    # -- Følner sums ------------------------------------------------------

    def folner_sum(self, x: BlockElement, k: int, method: str = "factored") -> BlockElement:
        """``sum_{g in F_k} U_g x U_g†``."""
        x.check_dims(self.dims)
        if method == "direct":
            stacks = self.evaluator.stack(self.folner.elements(k))
            return BlockElement(kernels.conj_sum(s, b) for s, b in zip(stacks, x.blocks))
        if method != "factored":
            raise ValueError(f"unknown method {method!r}")
        blocks = list(x.blocks)
        for part in reversed(self.folner.factor_sets(k)):
            stacks = self.evaluator.stack(part)
            blocks = [kernels.conj_sum(s, b) for s, b in zip(stacks, blocks)]
        return BlockElement(blocks)

    def average(self, x: BlockElement, k: int, method: str = "factored") -> BlockElement:
        avg = self.folner_sum(x, k, method) / self.folner.size(k)
        if x.is_hermitian():
            avg = hermitian_part(avg)
        return avg


@dataclass
class WStarSystem:
    """``(M, rho, G, Xi)`` with ``M`` a block algebra and ``rho`` a faithful invariant state."""

    action: Action
    rho: BlockState

    @property
    def dims(self) -> tuple[int, ...]:
        return self.action.dims

    @property
    def group(self) -> GroupModel:
        return self.action.group

    @property
    def folner(self) -> FolnerFamily:
        return self.action.folner


def validate_action(action: Action, rng: np.random.Generator | None = None, samples: int = 20) -> ValidationReport:
    rep = ValidationReport()
    for i, gen in enumerate(action.generator_unitaries):
        for b, u in enumerate(gen):
            r = float(np.linalg.norm(u @ u.conj().T - np.eye(u.shape[0])))
            rep.checks.append(Check("unitary", r, UNITARY_TOL, f"generator {i}, block {b}"))
    for j, word in enumerate(action.group.relations):
        mats = action.evaluator.word(word)
        for b, m in enumerate(mats):
            r = float(np.linalg.norm(m - np.eye(m.shape[0])))
            rep.checks.append(Check("relation", r, RELATION_TOL, f"relation {j}, block {b}"))
    rng = rng if rng is not None else np.random.default_rng(0)
    worst, where = 0.0, ""
    for _ in range(samples):
        g, h = action.group.sample(rng), action.group.sample(rng)
        ug, uh = action.unitary(g), action.unitary(h)
        ugh = action.unitary(action.group.multiply(g, h))
        for b in range(len(action.dims)):
            r = float(np.linalg.norm(ugh[b] - ug[b] @ uh[b]))
            if r > worst:
                worst, where = r, f"{g!r}*{h!r}, block {b}"
    rep.checks.append(Check("homomorphism", worst, RELATION_TOL, where))
    return rep


def validate_system(sys: WStarSystem, rng: np.random.Generator | None = None) -> ValidationReport:
    """Check unitarity, rho-invariance, faithfulness, relations and the homomorphism property.

    Residuals are Frobenius norms.  The report is returned even on failure;
    call :meth:`ValidationReport.raise_if_failed` for a hard stop.
    """
    rep = validate_action(sys.action, rng)
    rho = sys.rho
    if rho.dims != sys.dims:
        raise SignatureError(f"rho has signature {rho.dims}, algebra has {sys.dims}")
    bad = rho.violations()
    rep.checks.append(Check("rho_is_state", float(len(bad)), 0.0, ", ".join(bad)))
    for i, gen in enumerate(sys.action.generator_unitaries):
        for b, (u, d) in enumerate(zip(gen, rho.densities)):
            r = float(np.linalg.norm(u @ d - d @ u))
            rep.checks.append(Check("rho_invariance", r, INVARIANCE_TOL, f"generator {i}, block {b}"))
    for b, wd in enumerate(rho.weighted()):
        lo = float(np.linalg.eigvalsh((wd + wd.conj().T) / 2)[0])
        # residual form: how far below the floor the smallest eigenvalue is
        rep.checks.append(Check("faithful", max(0.0, FAITHFUL_MIN_EIG - lo), 0.0, f"block {b}, min eig {lo:.3g}"))
    return rep


def act(sys: WStarSystem | Action, g: GroupElement, x: BlockElement) -> BlockElement:
    return _action(sys).act(g, x)


def _action(sys) -> Action:
    return sys.action if isinstance(sys, WStarSystem) else sys


def ergodic_average(sys: WStarSystem | Action, x: BlockElement, k: int, method: str = "factored") -> BlockElement:
    """``(1/|F_k|) sum_{g in F_k} Xi_g(x)``."""
    return _action(sys).average(x, k, method)


class AverageSweep:
    """Averaging superoperators for increasing ``k``, accumulated incrementally.

    Each factor sequence of the Følner family keeps a running sum of
    ``U ⊗ conj(U)`` over its enumerated prefix; the average over ``F_k`` is the
    ordered product of the factor sums divided by ``|F_k|``.  Requests with
    decreasing prefix length restart that sequence from zero.
    """

    def __init__(self, action: Action):
        if max(action.dims) > SUPEROP_MAX_DIM:
            raise ValueError(f"superoperator sweep limited to blocks of size <= {SUPEROP_MAX_DIM}")
        self.action = action
        self._sums: dict[tuple, tuple[int, list[np.ndarray]]] = {}

    def _prefix(self, key: tuple, length: int) -> list[np.ndarray]:
        have = self._sums.get(key)
        if have is None or have[0] > length:
            have = (0, [np.zeros((n * n, n * n), dtype=np.complex128) for n in self.action.dims])
        start, sums = have
        if length > start:
            new = self.action.folner.sequence(key, length)[start:]
            stacks = self.action.evaluator.stack(new)
            sums = [s + kernels.adjoint_sum(st) for s, st in zip(sums, stacks)]
        self._sums[key] = (length, sums)
        return sums

    def superoperators(self, k: int) -> list[np.ndarray]:
        mats = None
        for key, length in self.action.folner.factors(k):
            sums = self._prefix(key, length)
            mats = sums if mats is None else [m @ s for m, s in zip(mats, sums)]
        size = self.action.folner.size(k)
        return [m / size for m in mats]

    @staticmethod
    def apply(supers: Sequence[np.ndarray], x: BlockElement) -> BlockElement:
        out = BlockElement((s @ b.reshape(-1)).reshape(b.shape) for s, b in zip(supers, x.blocks))
        return hermitian_part(out) if x.is_hermitian() else out

    def average(self, x: BlockElement, k: int) -> BlockElement:
        return self.apply(self.superoperators(k), x)


def norm_sequence(sys: WStarSystem | Action, x: BlockElement, ks: Sequence[int]) -> list[tuple[int, int, float]]:
    """Rows ``(k, |F_k|, ||average_k(x)||)`` in the given order of ``ks``."""
    action = _action(sys)
    x.check_dims(action.dims)
    rows = []
    if max(action.dims) <= SUPEROP_MAX_DIM:
        sweep = AverageSweep(action)
        for k in ks:
            rows.append((int(k), action.folner.size(k), operator_norm(sweep.average(x, k))))
    else:
        for k in ks:
            rows.append((int(k), action.folner.size(k), operator_norm(action.average(x, k))))
    return rows


def _ambiguous(values: np.ndarray, cut: float, where: str) -> None:
    near = values[(values > cut / 100) & (values < cut * 100)]
    if near.size:
        raise ProjectionAmbiguityError(f"{where}: values {near.tolist()} within two decades of the cut {cut:.1e}")


def fixed_basis_dense(us: Sequence[np.ndarray], rtol: float = FIXED_SPACE_RTOL) -> np.ndarray:
    """Orthonormal basis (columns, row-major ``vec``) of ``{y : u y u† = y}`` from one SVD.

    The null space of the stacked ``u ⊗ conj(u) - 1``; ``O(n^6)``, kept as a
    reference for small blocks.
    """
    n = us[0].shape[0]
    eye = np.eye(n * n)
    _, sv, vh = np.linalg.svd(np.vstack([np.kron(u, u.conj()) - eye for u in us]))
    cut = rtol * max(float(sv[0]), 1.0)
    _ambiguous(sv, cut, "fixed space")
    return vh[int(np.sum(sv > cut)) :].conj().T


def _eigen_clusters(u: np.ndarray, cut: float) -> tuple[np.ndarray, list[np.ndarray]]:
    t, z = scipy.linalg.schur(u, output="complex")
    lam = np.diag(t)
    dist = np.abs(lam[:, None] - lam[None, :])
    _ambiguous(dist[np.triu_indices(len(lam), 1)], cut, "eigenvalue clusters")
    ncomp, labels = connected_components(dist <= cut, directed=False)
    return z, [np.flatnonzero(labels == c) for c in range(ncomp)]


def _svd_tall(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Singular values and right vectors of a tall matrix, through its square R factor."""
    r = scipy.linalg.qr(m, mode="r")[0] if m.shape[0] > m.shape[1] else m
    try:
        _, sv, vh = scipy.linalg.svd(r, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        _, sv, vh = scipy.linalg.svd(r, lapack_driver="gesvd")
    return sv, vh


def fixed_basis(us: Sequence[np.ndarray], rtol: float = FIXED_SPACE_RTOL) -> np.ndarray:
    """Orthonormal basis of ``{y : u y u† = y for all u in us}``, columns in row-major ``vec``.

    The fixed space of one generator is spanned by ``z_i z_j†`` for Schur
    vectors in a common eigenvalue cluster; the remaining generators cut it
    down by an SVD on that (usually much smaller) basis.
    """
    n = us[0].shape[0]
    # start from the generator with the smallest fixed space
    cands = [_eigen_clusters(u, rtol) for u in us]
    first = min(range(len(us)), key=lambda i: sum(len(c) ** 2 for c in cands[i][1]))
    z, clusters = cands[first]
    cols = [np.kron(z[:, i], z[:, j].conj()) for c in clusters for i in c for j in c]
    basis = np.array(cols).T
    rest = [u for i, u in enumerate(us) if i != first]
    if not rest:
        return basis
    r = basis.shape[1]
    mats = basis.T.reshape(r, n, n)
    diff = np.vstack([((u @ mats @ u.conj().T) - mats).reshape(r, n * n).T for u in rest])
    if np.linalg.norm(diff, axis=0).max() <= rtol / 100:
        return basis
    sv, vh = _svd_tall(diff)
    cut = rtol * max(float(sv[0]), 1.0)
    _ambiguous(sv, cut, "fixed space")
    return basis @ vh[int(np.sum(sv > cut)) :].conj().T


class FixedPointProjector:
    """Hilbert–Schmidt orthogonal projection onto ``{y : U_g y U_g† = y for all generators}``.

    ``method="schur"`` (default) uses :func:`fixed_basis`; ``"dense"`` uses
    :func:`fixed_basis_dense`.  Gaps and singular values below
    ``FIXED_SPACE_RTOL`` (relative to the largest, at least 1) count as zero;
    values within two decades of that cut raise
    :class:`ProjectionAmbiguityError`.
    """

    def __init__(self, action: Action, rtol: float = FIXED_SPACE_RTOL, method: str = "schur"):
        if method not in ("schur", "dense"):
            raise ValueError(f"unknown method {method!r}")
        self.action = action
        self.rtol = rtol
        self.bases: list[np.ndarray] = []
        solve = fixed_basis if method == "schur" else fixed_basis_dense
        for b, n in enumerate(action.dims):
            us = [g[b] for g in action.generator_unitaries]
            if not us:
                self.bases.append(np.eye(n * n, dtype=np.complex128))
                continue
            try:
                self.bases.append(solve(us, rtol))
            except ProjectionAmbiguityError as exc:
                raise ProjectionAmbiguityError(f"block {b}: {exc}") from None

    @property
    def fixed_dims(self) -> tuple[int, ...]:
        return tuple(v.shape[1] for v in self.bases)

    def __call__(self, x: BlockElement) -> BlockElement:
        x.check_dims(self.action.dims)
        out = []
        for v, b in zip(self.bases, x.blocks):
            out.append((v @ (v.conj().T @ b.reshape(-1))).reshape(b.shape))
        y = BlockElement(out)
        return hermitian_part(y) if x.is_hermitian() else y


def mean_ergodic_projection(sys: WStarSystem | Action, x: BlockElement) -> BlockElement:
    """The norm limit of the Følner averages of ``x``."""
    return _action(sys).projector(x)
