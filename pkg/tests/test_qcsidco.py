import warnings

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kronframe.frames import FrameError, coherence, random_unit_norm_frame, welch_bound
from kronframe.qcsidco import (DegenerateFrameWarning, SidcoConfig, assemble_subproblem,
                               ball_radius, complexify, minimize_coherence, realified_inner,
                               realify, rotation_matrix, solve_subproblem)

S = 1 / np.sqrt(2)


# -- realification ----------------------------------------------------------

def test_realify_examples():
    np.testing.assert_array_equal(realify(np.array([1 + 2j])), [1.0, 2.0])
    np.testing.assert_array_equal(realify(np.zeros(3, dtype=complex)), np.zeros(6))
    D1 = rotation_matrix(1)
    np.testing.assert_array_equal(D1 @ realify(np.array([1 + 2j])), [-2.0, 1.0])
    np.testing.assert_array_equal(realify(np.array([1j * (1 + 2j)])), [-2.0, 1.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_realify_round_trip_and_rotation(M, seed):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    np.testing.assert_allclose(complexify(realify(f)), f, atol=0)
    np.testing.assert_allclose(rotation_matrix(M) @ realify(f), realify(1j * f), atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_realified_inner_products_match_complex(M, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    y = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    re, im = realified_inner(x, y)
    z = np.vdot(x, y)
    assert re == pytest.approx(z.real, abs=1e-12)
    assert im == pytest.approx(z.imag, abs=1e-12)


# -- ball radius ------------------------------------------------------------

def test_ball_radius_examples():
    assert ball_radius(np.array([0.1, -0.5, 0.3j])) == pytest.approx(0.75)
    assert ball_radius(np.zeros(4)) == 1.0
    with pytest.warns(DegenerateFrameWarning):
        assert ball_radius(np.array([0.2, 1.0])) == 0.0


# -- subproblem assembly ------------------------------------------------------

def test_assemble_hand_expanded_m1_n2():
    F = np.array([[1.0, 1j]])
    with pytest.warns(DegenerateFrameWarning):  # in C^1 every pair is collinear
        sub = assemble_subproblem(F, 0)
    # pruned column f2 = j: Re(f2^H f) = Im(f), Im(f2^H f) = -Re(f); x = [Re f, Im f, tR, tI]
    np.testing.assert_array_equal(sub.A_R1, [[0, 1, -1, 0]])
    np.testing.assert_array_equal(sub.A_R2, [[0, -1, -1, 0]])
    np.testing.assert_array_equal(sub.A_I1, [[1, 0, 0, -1]])
    np.testing.assert_array_equal(sub.A_I2, [[-1, 0, 0, -1]])
    # at f = a + bj the rows encode |b| <= tR and |a| <= tI, i.e. |Re|, |Im| of f2^H f
    a, b, tR, tI = 0.3, -0.4, 0.5, 0.6
    x = np.array([a, b, tR, tI])
    ip = np.vdot(np.array([1j]), np.array([a + 1j * b]))
    assert sub.A_R1 @ x == pytest.approx(ip.real - tR)
    assert sub.A_R2 @ x == pytest.approx(-ip.real - tR)
    assert sub.A_I1 @ x == pytest.approx(-ip.imag - tI)
    assert sub.A_I2 @ x == pytest.approx(ip.imag - tI)


def test_assemble_structure():
    F = random_unit_norm_frame(3, 6, np.random.default_rng(1))
    sub = assemble_subproblem(F, 2)
    n = 2 * 3 + 2
    for A in (sub.A_R1, sub.A_R2, sub.A_I1, sub.A_I2):
        assert A.shape == (5, n)
    np.testing.assert_array_equal(np.diag(sub.Q), [0] * 6 + [1, 1])
    assert np.count_nonzero(sub.Q - np.diag(np.diag(sub.Q))) == 0
    x = np.concatenate([realify(F[:, 2]), [0.7, -0.2]])
    assert x @ sub.Q @ x == pytest.approx(0.7 ** 2 + 0.2 ** 2)
    # anchor is the ball center: x^T B x - 2 b^T x + 1 = 0
    assert sub.ball_value(x) == pytest.approx(-sub.radius, abs=1e-14)
    g = np.abs(np.delete(F, 2, axis=1).conj().T @ F[:, 2])
    assert sub.radius <= 1 - g.max() ** 2 + 1e-12
    with pytest.raises(IndexError):
        assemble_subproblem(F, 6)


# -- subproblem solve ---------------------------------------------------------

def test_solve_already_optimal_returns_anchor():
    F = np.eye(3, 4, dtype=complex)
    F[:, 3] = np.array([1, 1, 0]) / np.sqrt(2)
    sub = assemble_subproblem(F, 2)  # e3 is orthogonal to everything else
    res = solve_subproblem(sub)
    assert res.converged
    np.testing.assert_allclose(res.f, F[:, 2], atol=1e-4)


def test_solve_degenerate_ball_returns_anchor_flagged():
    F = np.array([[1, 1, 0], [0, 0, 1]], dtype=complex)
    with pytest.warns(DegenerateFrameWarning):
        sub = assemble_subproblem(F, 0)
    res = solve_subproblem(sub)
    assert not res.converged
    np.testing.assert_array_equal(res.f, F[:, 0])


def _cvx_reference(sub):
    M = sub.M
    x = cp.Variable(2 * M + 2)
    G = sub.constraints
    cons = [G @ x <= 0, cp.sum_squares(x[: 2 * M] - realify(sub.anchor)) <= sub.radius]
    prob = cp.Problem(cp.Minimize(cp.sum_squares(x[2 * M:])), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value


def test_solve_m2_n3_improves_worst_pair():
    F = np.array([[1, 0, S], [0, 1, S]], dtype=complex)
    sub = assemble_subproblem(F, 2)
    res = solve_subproblem(sub)
    assert res.converged
    x_f = res.x[:-2]
    assert np.sum((x_f - realify(sub.anchor)) ** 2) <= sub.radius + 1e-8
    assert res.objective <= res.anchor_objective
    # sampled search over the feasible ball never beats the solver
    rng = np.random.default_rng(0)
    d = rng.standard_normal((200_000, 4))
    d *= (np.sqrt(sub.radius) * rng.random(200_000) ** 0.25 / np.linalg.norm(d, axis=1))[:, None]
    cand = realify(sub.anchor)[None, :] + d
    f = cand[:, :2] + 1j * cand[:, 2:]
    ip = f @ sub.pruned.conj()
    obj = np.max(np.abs(ip.real), axis=1) ** 2 + np.max(np.abs(ip.imag), axis=1) ** 2
    assert res.objective <= obj.min() + 1e-6
    assert res.objective == pytest.approx(_cvx_reference(sub), abs=1e-6)
    # the raw program iterate sits strictly inside the old worst pair
    raw = complexify(res.x[:-2])
    assert np.max(np.abs(sub.pruned.conj().T @ raw)) < S - 0.1
    # renormalized, no unit vector in C^2 beats 1/sqrt(2) against e1 and e2
    assert np.max(np.abs(sub.pruned.conj().T @ res.f)) == pytest.approx(S, abs=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_solver_matches_conic_reference(seed):
    F = random_unit_norm_frame(4, 9, np.random.default_rng(seed))
    sub = assemble_subproblem(F, seed % 9, guard=0.999)
    res = solve_subproblem(sub)
    assert res.converged
    assert res.objective == pytest.approx(_cvx_reference(sub), abs=1e-5)
    assert sub.ball_value(res.x) <= 1e-8


# -- sweeps -------------------------------------------------------------------

def test_orthonormal_square_frame_is_fixed_point():
    F = np.eye(4, dtype=complex)
    out, rep = minimize_coherence(F, SidcoConfig(max_sweeps=3), allow_square=True)
    assert coherence(out) == pytest.approx(0.0, abs=1e-9)
    assert rep.coherence_trace[-1] <= rep.coherence_trace[0]


def test_minimize_rejects_square_and_non_unit_norm():
    with pytest.raises(FrameError):
        minimize_coherence(np.eye(3))
    with pytest.raises(FrameError):
        minimize_coherence(2 * random_unit_norm_frame(2, 4, np.random.default_rng(0)))


def test_m4_n8_seeded_regression():
    F0 = random_unit_norm_frame(4, 8, np.random.default_rng(7))
    F, rep = minimize_coherence(F0, SidcoConfig())
    final = coherence(F)
    assert final >= welch_bound(4, 8) - 1e-12
    assert welch_bound(4, 8) == pytest.approx(0.37796, abs=1e-5)
    assert final < coherence(F0)
    # recorded baseline for this seed
    assert coherence(F0) == pytest.approx(0.8177062478948521, abs=1e-12)
    assert final == pytest.approx(0.4369367936932868, abs=1e-6)
    assert rep.coherence_trace[-1] == final


@pytest.mark.parametrize("M,N,seed", [(3, 6, 0), (4, 8, 1), (6, 20, 2), (8, 30, 3)])
def test_sweep_invariants(M, N, seed):
    F0 = random_unit_norm_frame(M, N, np.random.default_rng(seed))
    F, rep = minimize_coherence(F0, SidcoConfig(max_sweeps=25))
    trace = np.array(rep.coherence_trace)
    assert np.all(np.diff(trace) <= 0)
    np.testing.assert_allclose(np.linalg.norm(F, axis=0), 1.0, atol=1e-10)
    if N <= M * M:
        assert trace[-1] >= welch_bound(M, N) - 1e-12
    assert rep.sweeps == len(trace) - 1
    d = rep.to_dict()
    assert set(d) == {"sweeps", "coherence_trace", "flagged_columns"}


def test_persistent_collinearity_warns():
    F = random_unit_norm_frame(3, 6, np.random.default_rng(2))
    F[:, 1] = F[:, 0]
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        out, rep = minimize_coherence(F, SidcoConfig(max_sweeps=2))
    assert any(issubclass(x.category, DegenerateFrameWarning) for x in w)
    assert {0, 1} <= set(rep.flagged_columns)
    assert rep.degenerate


def test_config_validation():
    with pytest.raises(ValueError):
        SidcoConfig(max_sweeps=0)
    with pytest.raises(ValueError):
        SidcoConfig(qp_tol=0)
    with pytest.raises(ValueError):
        SidcoConfig(ball_shrink_guard=1.5)
