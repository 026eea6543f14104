import numpy as np
import pytest
from conftest import SX, SZ, heis_action, s3_perm_action, trace_system, zd_action
from hypothesis import given, settings
from hypothesis import strategies as st

from folnerlab.dynamics import (
    AverageSweep,
    FixedPointProjector,
    ProjectionAmbiguityError,
    WStarSystem,
    act,
    ergodic_average,
    fixed_basis,
    fixed_basis_dense,
    mean_ergodic_projection,
    norm_sequence,
    validate_system,
)
from folnerlab.groups import HeisenbergGroup
from folnerlab.matrix import BlockElement, BlockState, random_hermitian, random_unitary


def test_trace_state_is_invariant_for_any_unitaries():
    rng = np.random.default_rng(0)
    sys = trace_system(zd_action([[random_unitary(3, rng)]]))
    assert validate_system(sys).ok


def test_non_invariant_rho_residual():
    action = zd_action([[SX.real]])
    sys = WStarSystem(action, BlockState([1.0], [np.diag([0.9, 0.1])]))
    rep = validate_system(sys)
    assert not rep.ok
    assert rep.worst("rho_invariance") == pytest.approx(0.8 * np.sqrt(2), abs=1e-12)


def test_non_commuting_zd_generators_fail_relation():
    sys = trace_system(zd_action([[SX], [SZ]]))
    rep = validate_system(sys)
    assert not rep.ok
    assert {c.name for c in rep.failures()} >= {"relation"}
    # [SX, SZ] = -1 is far from the identity: ||SX SZ SX^-1 SZ^-1 - 1||_F = 2 sqrt(2)
    assert rep.worst("relation") == pytest.approx(2 * np.sqrt(2), abs=1e-12)


def test_non_unitary_generator_fails():
    sys = trace_system(zd_action([[np.diag([1.0, 1.001])]]))
    assert "unitary" in {c.name for c in validate_system(sys).failures()}


def test_non_faithful_rho_fails():
    sys = WStarSystem(zd_action([[SZ]]), BlockState([1.0], [np.diag([1.0, 0.0])]))
    assert "faithful" in {c.name for c in validate_system(sys).failures()}


def test_act_examples(alternating, ones2):
    G = alternating.group
    assert act(alternating, G.identity, ones2).max_abs_diff(ones2) == 0
    out = act(alternating, G.element((1,)), ones2)
    assert np.allclose(out.blocks[0], [[1, -1], [-1, 1]])


def test_average_examples(alternating, ones2):
    assert ergodic_average(alternating, ones2, 1).max_abs_diff(ones2) < 1e-15
    assert np.allclose(ergodic_average(alternating, ones2, 2).blocks[0], np.eye(2), atol=1e-15)
    assert np.allclose(ergodic_average(alternating, ones2, 3).blocks[0], [[1, 1 / 3], [1 / 3, 1]], atol=1e-15)


def test_alternating_norm_closed_form(alternating, ones2):
    rows = norm_sequence(alternating, ones2, range(1, 201))
    for k, size, norm in rows:
        assert size == k
        expected = 1 + 1 / k if k % 2 else 1.0
        assert abs(norm - expected) <= 1e-9


def test_identity_action_norms_constant():
    rng = np.random.default_rng(2)
    sys = trace_system(zd_action([[np.eye(3)]]))
    x = BlockElement([np.diag([1.0, 2.0, 5.0])])
    assert all(abs(n - 5.0) < 1e-12 for _, _, n in norm_sequence(sys, x, [1, 7, 50]))
    h = random_hermitian([3], rng)
    assert mean_ergodic_projection(sys, h).max_abs_diff(h) < 1e-12


def test_finite_group_norms_constant():
    sys = trace_system(s3_perm_action())
    rng = np.random.default_rng(5)
    x = BlockElement([np.diag(rng.uniform(0, 3, size=3))])
    norms = [n for _, _, n in norm_sequence(sys, x, range(1, 8))]
    assert max(norms) - min(norms) < 1e-12
    assert abs(norms[0] - np.linalg.norm(mean_ergodic_projection(sys, x).blocks[0], 2)) < 1e-10


def test_projection_example(alternating, ones2):
    assert np.allclose(mean_ergodic_projection(alternating, ones2).blocks[0], np.eye(2), atol=1e-14)


def _systems():
    rng = np.random.default_rng(11)
    u = random_unitary(3, rng)
    diag1 = np.diag(np.exp(2j * np.pi * np.array([0, 1, 1]) / 4))
    diag2 = np.diag(np.exp(2j * np.pi * np.array([0, 2, 1]) / 4))
    z2 = zd_action([[u @ diag1 @ u.conj().T, SZ], [u @ diag2 @ u.conj().T, np.diag([1, 1j])]])
    heis = heis_action([SX, np.eye(1)], [SZ, np.array([[1j]])])
    return [z2, heis, s3_perm_action()]


@pytest.mark.parametrize("idx", range(3))
def test_factored_sum_matches_direct(idx):
    action = _systems()[idx]
    x = random_hermitian(action.dims, np.random.default_rng(idx))
    for k in (1, 2, 3, 4):
        a = action.folner_sum(x, k, "factored")
        b = action.folner_sum(x, k, "direct")
        assert a.max_abs_diff(b) < 1e-10 * action.folner.size(k)


@pytest.mark.parametrize("idx", range(3))
def test_sweep_matches_direct_average(idx):
    action = _systems()[idx]
    sweep = AverageSweep(action)
    x = random_hermitian(action.dims, np.random.default_rng(idx + 10))
    for k in (1, 3, 2, 5, 4):
        assert sweep.average(x, k).max_abs_diff(action.average(x, k)) < 1e-12


@pytest.mark.parametrize("idx", range(3))
def test_homomorphism_on_samples(idx):
    action = _systems()[idx]
    assert validate_system(trace_system(action)).ok
    rng = np.random.default_rng(4)
    G = action.group
    for _ in range(20):
        g, h = G.sample(rng), G.sample(rng)
        lhs = action.unitary(G.multiply(g, h))
        rhs = [a @ b for a, b in zip(action.unitary(g), action.unitary(h))]
        assert max(np.abs(p - q).max() for p, q in zip(lhs, rhs)) < 1e-10


def test_heisenberg_unitary_matches_word_evaluation():
    action = _systems()[1]
    rng = np.random.default_rng(9)
    H = action.group
    assert isinstance(H, HeisenbergGroup)
    for _ in range(20):
        g = H.sample(rng, radius=4)
        a = action.unitary(g)
        b = action.evaluator.word(H.normal_form_word(g))
        assert max(np.abs(p - q).max() for p, q in zip(a, b)) < 1e-10


@pytest.mark.parametrize("idx", range(3))
def test_projection_properties(idx):
    action = _systems()[idx]
    E = action.projector
    rng = np.random.default_rng(idx)
    for _ in range(5):
        x = random_hermitian(action.dims, rng)
        ex = E(x)
        assert E(ex).max_abs_diff(ex) < 1e-10
        for i in range(len(action.group.generators)):
            assert action.act_generator(i, ex).max_abs_diff(ex) < 1e-10
            assert E(action.act_generator(i, x)).max_abs_diff(ex) < 1e-10


@pytest.mark.parametrize("idx", range(3))
def test_averages_approach_projection(idx):
    action = _systems()[idx]
    x = random_hermitian(action.dims, np.random.default_rng(idx))
    ex = action.projector(x)
    gaps = [action.average(x, k).max_abs_diff(ex) for k in (4, 8, 16)]
    assert gaps[-1] <= gaps[0] + 1e-12
    assert gaps[-1] < 0.5


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5))
def test_schur_fixed_basis_matches_dense(seed, n):
    rng = np.random.default_rng(seed)
    w = random_unitary(n, rng)
    us = [w @ np.diag(np.exp(2j * np.pi * rng.integers(0, 3, size=n) / 3)) @ w.conj().T for _ in range(2)]
    a, b = fixed_basis(us), fixed_basis_dense(us)
    assert a.shape == b.shape
    assert np.abs(a @ a.conj().T - b @ b.conj().T).max() < 1e-10


def test_scalar_generators_fix_everything():
    action = zd_action([[-np.eye(2)], [np.eye(2)]])
    assert action.projector.fixed_dims == (4,)


def test_near_degenerate_spectrum_is_ambiguous():
    u = np.diag(np.exp(1j * np.array([0.0, 1e-9])))
    with pytest.raises(ProjectionAmbiguityError):
        FixedPointProjector(zd_action([[u]]))
