"""C*-models ``(A, G, Theta; iota)`` of a W*-dynamical system, and their quotients.

The domain ``A`` is a block algebra; ``ker iota`` is the direct sum of the
blocks listed in ``kernel_blocks``, and ``iota`` drops those blocks, mapping
each surviving block identically onto the matching block of ``M``.  The
quotient ``A / ker iota`` is then the algebra of surviving blocks and the
quotient map is the same block drop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from folnerlab.dynamics import Action, WStarSystem
from folnerlab.matrix import (
    BlockElement,
    BlockState,
    SignatureError,
    operator_norm,
    random_hermitian,
)

__all__ = [
    "AnnihilatorError",
    "CStarModel",
    "EquivarianceReport",
    "apply_iota",
    "project",
    "quotient_model",
    "pullback_state",
    "pushforward_state",
    "check_equivariance",
    "EQUIVARIANCE_TOL",
    "KERNEL_MASS_TOL",
]

EQUIVARIANCE_TOL = 1e-8
KERNEL_MASS_TOL = 1e-12


class AnnihilatorError(ValueError):
    """A state that should vanish on ``ker iota`` puts weight on a kernel block."""


@dataclass
class CStarModel:
    theta: Action
    kernel_blocks: frozenset[int]
    target: WStarSystem

    def __init__(self, theta: Action, kernel_blocks: Sequence[int], target: WStarSystem):
        self.theta = theta
        self.kernel_blocks = frozenset(int(b) for b in kernel_blocks)
        self.target = target
        if any(not 0 <= b < len(theta.dims) for b in self.kernel_blocks):
            raise SignatureError(f"kernel block index out of range for {len(theta.dims)} blocks")
        surv = tuple(theta.dims[b] for b in self.surviving)
        if surv != target.dims:
            # iota must be onto M: the surviving blocks are M's blocks, in order
            raise SignatureError(f"surviving blocks {surv} do not match the target signature {target.dims}")
        if theta.group is not target.group:
            raise SignatureError("domain and target must carry the same group model")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.theta.dims

    @property
    def surviving(self) -> tuple[int, ...]:
        return tuple(b for b in range(len(self.theta.dims)) if b not in self.kernel_blocks)

    @property
    def faithful(self) -> bool:
        return not self.kernel_blocks


def apply_iota(m: CStarModel, a: BlockElement) -> BlockElement:
    a.check_dims(m.dims)
    return BlockElement(a.blocks[b] for b in m.surviving)


def project(m: CStarModel, a: BlockElement) -> BlockElement:
    """The quotient map ``a -> a + ker iota`` onto the surviving blocks."""
    a.check_dims(m.dims)
    return BlockElement(a.blocks[b] for b in m.surviving)


def quotient_model(m: CStarModel) -> CStarModel:
    """The faithful model on ``A / ker iota`` with the induced action."""
    return CStarModel(m.theta.restrict(m.surviving), (), m.target)


def pullback_state(m: CStarModel, state: BlockState) -> BlockState:
    """``psi -> psi ∘ pi`` from the quotient to ``A``: zero weight on kernel blocks."""
    q_dims = tuple(m.dims[b] for b in m.surviving)
    if state.dims != q_dims:
        raise SignatureError(f"state on {state.dims} is not a state on the quotient {q_dims}")
    weights = np.zeros(len(m.dims))
    dens = [np.eye(n, dtype=np.complex128) / n for n in m.dims]
    for j, b in enumerate(m.surviving):
        weights[b] = state.weights[j]
        dens[b] = state.densities[j]
    return BlockState(weights, dens)


def pushforward_state(m: CStarModel, state: BlockState) -> BlockState:
    """``psi -> psi~`` with ``psi~(pi(a)) = psi(a)``, for ``psi`` vanishing on ``ker iota``."""
    if state.dims != m.dims:
        raise SignatureError(f"state on {state.dims} is not a state on {m.dims}")
    mass = float(sum(state.weights[b] for b in m.kernel_blocks))
    if mass > KERNEL_MASS_TOL:
        raise AnnihilatorError(f"state puts weight {mass:.3g} on ker iota")
    w = np.array([state.weights[b] for b in m.surviving])
    return BlockState(w / w.sum(), [state.densities[b] for b in m.surviving])


@dataclass
class EquivarianceReport:
    residual: float
    tol: float = EQUIVARIANCE_TOL
    per_generator: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tol)


def check_equivariance(m: CStarModel, samples: int = 20, seed: int = 0) -> EquivarianceReport:
    """Largest ``||Xi_g(iota(a)) - iota(Theta_g(a))||`` over generators and seeded ``a``."""
    rng = np.random.default_rng(seed)
    elems = [random_hermitian(m.dims, rng) for _ in range(samples)]
    per_gen = []
    for i in range(len(m.theta.group.generators)):
        worst = 0.0
        for a in elems:
            lhs = m.target.action.act_generator(i, apply_iota(m, a))
            rhs = apply_iota(m, m.theta.act_generator(i, a))
            worst = max(worst, operator_norm(lhs - rhs))
        per_gen.append(worst)
    return EquivarianceReport(max(per_gen, default=0.0), per_generator=per_gen)
