import numpy as np
import pytest
from conftest import SX, SZ, heis_action, s3_perm_action, trace_system, zd_action
from hypothesis import given, settings
from hypothesis import strategies as st
from test_cstar import faithful_model, kernel_model

from folnerlab.cstar import CStarModel
from folnerlab.dynamics import Action
from folnerlab.matrix import BlockElement, NotPositiveError, norming_state, operator_norm, random_positive, state_eval
from folnerlab.optimize import (
    ConvergenceError,
    invariant_subspace,
    m_value,
    maximizing_state,
    sdp_cross_check,
)


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def test_invariant_subspace_dimensions():
    assert invariant_subspace(zd_action([[np.eye(3)]])).dims == (9,)
    assert invariant_subspace(zd_action([[SZ]])).dims == (2,)
    sub = invariant_subspace(zd_action([[rotation(2 * np.pi / 5)]]))
    assert sub.dims == (2,)
    # span{I, J} with J the rotation generator
    J = np.array([[0, -1], [1, 0]])
    for m in (np.eye(2), 1j * J):
        h = m.astype(complex)
        assert np.abs(sub.project_hermitian(0, h) - h).max() < 1e-12
    assert sub.orthonormality_residual() < 1e-12


def test_identity_action_full():
    theta = zd_action([[np.eye(3)]])
    sys = trace_system(theta)
    m = CStarModel(theta, [], sys)
    a = random_positive([3], np.random.default_rng(0))
    r = m_value(m, a, "full")
    assert r.value == pytest.approx(operator_norm(a), abs=1e-12)
    assert r.witness.distance(norming_state(a)) < 1e-10
    assert maximizing_state(theta, a).distance(norming_state(a)) < 1e-10
    assert sdp_cross_check(theta, a).value == pytest.approx(operator_norm(a), abs=1e-6)


def test_alternating_example():
    m = faithful_model()
    a = BlockElement([np.ones((2, 2))])
    for backend in ("fixed_point", "frank_wolfe"):
        r = m_value(m, a, "full", backend)
        assert r.value == pytest.approx(1.0, abs=1e-9)
        assert r.residuals["invariance"] < 1e-10
    w = m_value(m, a, "full").witness
    assert np.allclose(w.densities[0], np.diag([1, 0]))


def test_kernel_example_trivial_and_alternating():
    a = BlockElement([np.ones((2, 2)), 3 * np.eye(2)])
    # trivial action: the annihilator maximum is ||[[1,1],[1,1]]|| = 2, the full one 3
    triv = trace_system(zd_action([[np.eye(2)]]))
    theta = Action(triv.group, triv.folner, [2, 2], [[np.eye(2), np.eye(2)]])
    m = CStarModel(theta, [1], triv)
    assert m_value(m, a, "annihilator").value == pytest.approx(2.0, abs=1e-12)
    assert m_value(m, a, "full").value == pytest.approx(3.0, abs=1e-12)
    # alternating action on the surviving block: 1 and 3
    k = kernel_model()
    for backend in ("fixed_point", "frank_wolfe"):
        r = m_value(k, a, "annihilator", backend)
        assert r.value == pytest.approx(1.0, abs=1e-9)
        assert r.witness.weights[1] == 0
        assert r.residuals["invariance"] < 1e-10
    assert m_value(k, a, "full").value == pytest.approx(3.0, abs=1e-12)


def test_kernel_block_does_not_affect_annihilator_value():
    base = BlockElement([np.ones((2, 2)), 3 * np.eye(2)])
    k = kernel_model()
    for scale in (0.0, 1.0, 100.0):
        a = BlockElement([base.blocks[0], scale * np.eye(2)])
        assert m_value(k, a, "annihilator").value == pytest.approx(1.0, abs=1e-12)


def test_negative_element_rejected():
    with pytest.raises(NotPositiveError):
        m_value(faithful_model(), BlockElement([np.diag([1.0, -1.0])]))


def _actions():
    return [
        zd_action([[SZ], [np.diag([1, 1j])]]),
        heis_action([SX, np.eye(1)], [SZ, np.array([[1j]])]),
        s3_perm_action(),
        zd_action([[rotation(2 * np.pi / 5), np.diag([1, -1, 1j])]]),
    ]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 3), st.integers(0, 10_000))
def test_backends_agree(idx, seed):
    action = _actions()[idx]
    a = random_positive(action.dims, np.random.default_rng(seed))
    model = CStarModel(action, [], trace_system(action))
    fp = m_value(model, a, "full", "fixed_point")
    fw = m_value(model, a, "full", "frank_wolfe")
    assert abs(fp.value - fw.value) <= 1e-6
    assert fw.residuals["duality_gap"] <= 1e-9
    # an invariant state never beats the maximum
    assert state_eval(fw.witness, a).real <= fp.value + 1e-9


def test_frank_wolfe_reports_non_convergence():
    action = _actions()[0]
    a = random_positive(action.dims, np.random.default_rng(0))
    with pytest.raises(ConvergenceError) as err:
        sdp_cross_check(action, a, max_iter=0, gap_tol=-1.0)
    assert err.value.iterations == 0
