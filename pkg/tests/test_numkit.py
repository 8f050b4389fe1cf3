import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from intertwine.numkit import (
    SingularMatrix, det_derivative, hadamard_bound, inverse, lu_det, replace_column, residual_norm,
)


def test_det_identity():
    assert lu_det(np.eye(4)) == pytest.approx(1)


def test_det_diag():
    assert lu_det(np.diag([2, 3j])) == pytest.approx(6j)


def test_det_rank_deficient():
    assert abs(lu_det([[1, 2], [2, 4]])) < 1e-15


def test_det_empty_matrix():
    assert lu_det(np.zeros((0, 0))) == 1


def test_inverse_identity_and_involution():
    np.testing.assert_allclose(inverse(np.eye(3)), np.eye(3))
    P = np.array([[0, 1], [1, 0]])
    np.testing.assert_allclose(inverse(P), P)


def test_inverse_zero_matrix():
    with pytest.raises(SingularMatrix):
        inverse(np.zeros((2, 2)))


def test_inverse_nearly_singular():
    with pytest.raises(SingularMatrix):
        inverse([[1, 1], [1, 1 + 1e-15]])


def test_det_derivative_at_identity():
    A = np.array([[1, 2j, 0], [3, -1, 4], [0.5, 0, 2]])
    assert det_derivative(np.eye(3), A) == pytest.approx(np.trace(A))


def test_det_derivative_diagonal():
    a, b, da, db = 2.0, -3.0, 0.5, 7.0
    assert det_derivative(np.diag([a, b]), np.diag([da, db])) == pytest.approx(da * b + a * db)


def test_det_derivative_scalar():
    assert det_derivative([[5.0]], [[1.25]]) == pytest.approx(1.25)


def test_det_derivative_singular_route():
    # rank-one M: the adjugate route is unavailable
    M = np.array([[1.0, 2.0], [2.0, 4.0]])
    Mp = np.array([[0.3, -1.0], [2.0, 0.5]])
    t = 1e-6
    fd = (np.linalg.det(M + t * Mp) - np.linalg.det(M - t * Mp)) / (2 * t)
    assert det_derivative(M, Mp) == pytest.approx(fd, abs=1e-8)


def test_det_derivative_batched():
    rng = np.random.default_rng(3)
    M = rng.normal(size=(5, 3, 3))
    Mp = rng.normal(size=(5, 3, 3))
    out = det_derivative(M, Mp)
    assert out.shape == (5,)
    for k in range(5):
        assert out[k] == pytest.approx(det_derivative(M[k], Mp[k]))


def test_replace_column():
    M = np.arange(9.0).reshape(3, 3)
    R = replace_column(M, 1, [7, 8, 9])
    np.testing.assert_allclose(R[:, 1], [7, 8, 9])
    np.testing.assert_allclose(M[:, 1], [1, 4, 7])


def test_hadamard_bound_dominates_det():
    rng = np.random.default_rng(0)
    for _ in range(20):
        M = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        assert abs(lu_det(M)) <= hadamard_bound(M) * (1 + 1e-12)


def test_residual_norm():
    assert residual_norm([1, -3j, 2]) == pytest.approx(3)


cmat = st.integers(1, 4).flatmap(lambda k: arrays(
    np.complex128, (k, k),
    elements=st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False)))


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_det_multiplicative(data):
    A = data.draw(cmat)
    B = data.draw(arrays(np.complex128, A.shape,
                         elements=st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False)))
    lhs = lu_det(A @ B)
    rhs = lu_det(A) * lu_det(B)
    scale = hadamard_bound(A) * hadamard_bound(B)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, scale)


@settings(max_examples=200, deadline=None)
@given(cmat, st.data())
def test_det_derivative_matches_finite_difference(M, data):
    Mp = data.draw(arrays(np.complex128, M.shape,
                          elements=st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False)))
    t = 1e-6
    fd = (lu_det(M + t * Mp) - lu_det(M - t * Mp)) / (2 * t)
    scale = (hadamard_bound(M) + hadamard_bound(Mp) + 1) ** 1
    got = det_derivative(M, Mp)
    assert abs(got - fd) <= 1e-5 * max(1.0, scale * np.max(np.abs(M) + np.abs(Mp) + 1) ** 2)


@settings(max_examples=100, deadline=None)
@given(cmat)
def test_inverse_round_trip(M):
    try:
        Mi = inverse(M)
    except SingularMatrix:
        return
    cond = np.linalg.cond(M)
    assert np.max(np.abs(M @ Mi - np.eye(len(M)))) <= 1e-12 * max(1.0, cond)
