import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lklab.control import ControlFunction
from lklab.grassmann import (
    SobolevVector,
    a_matrix,
    continuity_experiment,
    five_terms,
    lambda_weight,
    op_norm_h12,
    project,
    projection_blocks,
    projection_residuals,
)
from lklab.grunsky import grunsky_coefficients, grunsky_operator
from lklab.loewner import DrivingSpec, solve_coefficients
from lklab.paths import PiecewisePath

seeds = st.integers(0, 2**32 - 1)


def random_contraction(rng, M=6, norm=0.8):
    X = rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))
    X = X + X.T  # Grunsky operators are complex symmetric
    return norm * X / np.linalg.norm(X, 2)


def test_sobolev_vector_basics():
    h = SobolevVector.monomial(-3, 5, 2.0)
    assert h.norm() == pytest.approx(2 * np.sqrt(3))
    x = h.coords(5)
    back = SobolevVector.from_coords(x, 5)
    np.testing.assert_allclose(back.h_neg, h.h_neg)
    np.testing.assert_allclose(lambda_weight(2), [np.sqrt(2), 1, 1, 1, np.sqrt(2)])
    with pytest.raises(ValueError):
        SobolevVector(np.zeros(2), 0, np.zeros(3))


@given(seeds)
def test_a_matrix(seed):
    rng = np.random.default_rng(seed)
    B = random_contraction(rng)
    A = a_matrix(B)
    np.testing.assert_allclose(A @ (np.eye(6) + B @ B.conj().T), np.eye(6), atol=1e-12)
    assert np.linalg.norm(A, 2) <= 1 + 1e-12
    np.testing.assert_allclose(A, A.conj().T, atol=1e-14)
    np.testing.assert_allclose(a_matrix(np.zeros((4, 4))), np.eye(4))


def test_projection_zero_operator():
    P = projection_blocks(np.zeros((3, 3))).assemble()
    np.testing.assert_allclose(P, np.diag([1, 1, 1, 1, 0, 0, 0]))


@given(seeds)
def test_projection_matches_frame_oracle(seed):
    rng = np.random.default_rng(seed)
    B = random_contraction(rng)
    blocks = projection_blocks(B)
    # orthogonal projection onto span(frame) plus the constant mode via least squares
    W = np.zeros((13, 7), dtype=complex)
    W[:6, :6] = np.eye(6)
    W[7:, :6] = B
    W[6, 6] = 1.0
    Q, _ = np.linalg.qr(W)
    np.testing.assert_allclose(blocks.assemble(), Q @ Q.conj().T, atol=1e-12)
    res = projection_residuals(blocks)
    assert max(vars(res).values()) < 1e-12


def test_projection_rejects_non_square():
    with pytest.raises(ValueError):
        projection_blocks(np.zeros((2, 3)))


def test_project_examples():
    P = projection_blocks(np.zeros((4, 4)))
    c = project(SobolevVector.monomial(0, 4, 3.0), P)
    assert c.h0 == 3.0 and not np.any(c.h_pos) and not np.any(c.h_neg)
    assert project(SobolevVector.monomial(-3, 4), P).norm() == 0.0
    rng = np.random.default_rng(1)
    B = random_contraction(rng, M=4)
    P = projection_blocks(B)
    for n in range(1, 5):
        # w_n = z^n + sum_m sqrt(m/n) ... ; built from the frame column
        w = SobolevVector.from_coords(P.frame()[:, n - 1], 4)
        out = project(w, P)
        np.testing.assert_allclose(out.coords(4), w.coords(4), atol=1e-13)
        v = SobolevVector.from_coords(P.complement()[:, n - 1], 4)
        assert project(v, P).norm() < 1e-13


def test_project_warns_on_dropped_modes():
    P = projection_blocks(np.zeros((2, 2)))
    with pytest.warns(RuntimeWarning):
        project(SobolevVector.monomial(4, 4), P)
    with pytest.raises(ValueError):
        project(SobolevVector.monomial(1, 1), P)


@given(seeds)
def test_op_norm_h12(seed):
    assert op_norm_h12(np.diag([0.3, 0.7])) == pytest.approx(0.7)
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(5, 5))
    U, _ = np.linalg.qr(rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5)))
    assert op_norm_h12(U @ X @ U.conj().T) == pytest.approx(op_norm_h12(X), rel=1e-12)


@given(seeds)
def test_five_terms_dominated(seed):
    rng = np.random.default_rng(seed)
    Bs = random_contraction(rng, norm=0.5)
    Bt = Bs + 0.05 * random_contraction(rng, norm=1.0)
    terms, est = five_terms(Bs, Bt)
    assert all(t <= e * (1 + 1e-12) + 1e-30 for t, e in zip(terms, est))
    bs, bt = projection_blocks(Bs), projection_blocks(Bt)
    d = op_norm_h12(bt.assemble() - bs.assemble())
    assert d**2 <= 2 * (terms[0] + terms[1]) + 3 * sum(terms[2:]) + 1e-14


def koebe_like_operators(times, M=8):
    T = times[-1]
    d = DrivingSpec(PiecewisePath.zero(T), [PiecewisePath.linear(1.0, T)])
    return [grunsky_operator(grunsky_coefficients(s.series, M)) for s in solve_coefficients(d, times, 2 * M + 1)]


def test_continuity_diagonal_and_refusal():
    t = np.array([0.0, 0.01])
    Bs = koebe_like_operators(t)
    rep = continuity_experiment([0.0, 0.0], [Bs[0], Bs[0]], ControlFunction.linear_rate(1.0), 0.01)
    assert rep.rows[0][4] == 0.0 and rep.c_star == 0.0
    with pytest.raises(ValueError):
        continuity_experiment(t, Bs, ControlFunction.linear_rate(20.0), 0.01)


def test_continuity_on_shipped_flows(flow):
    t = flow.t_grid[:: max(1, len(flow.t_grid) // 10)]
    reports = []
    for M in (8, 12):
        Bs = [grunsky_operator(grunsky_coefficients(s.series, M)) for s in solve_coefficients(flow.driving, t, 2 * M + 1)]
        rep = continuity_experiment(t, Bs, flow.control, flow.driving.T)
        assert rep.finite and rep.max_decomposition_ratio <= 1 + 1e-9
        assert rep.max_term_ratio <= 1 + 1e-9
        assert rep.max_projection_residual < 1e-12
        reports.append(rep)
    assert reports[0].c_star == pytest.approx(reports[1].c_star, rel=1e-6)
