import numpy as np
import pytest

from folnerlab.dynamics import Action, WStarSystem
from folnerlab.groups import HeisenbergGroup, ZdGroup, folner_family, symmetric_group
from folnerlab.matrix import BlockElement, BlockState

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def zd_action(gens, d=None):
    """``Z^d`` acting by the given per-generator block unitaries."""
    group = ZdGroup(d if d is not None else len(gens))
    dims = [u.shape[0] for u in gens[0]]
    return Action(group, folner_family(group), dims, gens)


def heis_action(x, y):
    group = HeisenbergGroup()
    dims = [u.shape[0] for u in x]
    return Action(group, folner_family(group), dims, [x, y])


def s3_perm_action():
    s3, perms = symmetric_group(3)
    mats = [np.eye(3)[:, list(perms[g.coords[0]])] for g in s3.generators]
    return Action(s3, folner_family(s3), [3], [[m] for m in mats])


def trace_system(action):
    total = sum(action.dims)
    rho = BlockState([n / total for n in action.dims], [np.eye(n) / n for n in action.dims])
    return WStarSystem(action, rho)


@pytest.fixture
def alternating():
    return trace_system(zd_action([[SZ]]))


@pytest.fixture
def ones2():
    return BlockElement([np.ones((2, 2))])
