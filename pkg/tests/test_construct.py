import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intertwine.construct import (
    ConstantOperator, Window, apply_operator, build_intertwiner, default_test_functions,
    final_potential, intertwining_residual, kernel_residual, wronskian, wronskian_values,
)
from intertwine.errors import CountMismatch, DimensionMismatch, SingularLeading, SingularWronskian
from intertwine.schrodinger import ChainSet, MatrixHamiltonian, VectorFunction

from conftest import E1_WINDOW, chain

XS = E1_WINDOW.points()
SECH2 = 1 / np.cosh(XS) ** 2

# (d^2 + a1 d + a0) annihilating cosh x and sinh 2x, and V- = 2 a1'; exact values
# from symbolic elimination
TWO_STEP_ORACLE = [
    (-1.5, 2.7154447609345991, 1.4578800832290544, -1.0842398335418912),
    (0.0, 0.0, -1.0, -6.0),
    (0.7, -1.8131033313514906, 0.095781230052624178, -3.8084375398947516),
    (2.0, -2.8920827402274507, 1.7880475254405066, -0.42390494911898680),
]


class TestWronskian:
    def test_single_cosh(self):
        ev = wronskian([chain(-1, "cosh(x)")], 1, 1, 0.0)
        np.testing.assert_allclose(ev.matrix, [[1]])
        assert ev.det == pytest.approx(1)

    def test_counterexample_vanishes(self):
        cs = [chain(1, ["exp(1i*x)", "0"]), chain(4, ["exp(2i*x)", "0"])]
        for x in (-1.0, 0.0, 2.3):
            assert wronskian(cs, 2, 1, x).det == 0

    def test_exponential_pair(self):
        ev = wronskian([chain(-1, "exp(x)"), chain(-1, "exp(-x)")], 1, 2, 0.0)
        np.testing.assert_allclose(ev.matrix, [[1, 1], [1, -1]])
        assert ev.det == pytest.approx(-2)

    def test_count_mismatch(self):
        with pytest.raises(CountMismatch):
            wronskian([chain(-1, "exp(x)")], 1, 2, 0.0)

    def test_matrix_layout(self):
        # row l is (phi_l, phi_l') for n=2, N=1 this is just the two vectors
        cs = [chain(1, ["exp(x)", "1"]), chain(2, ["x", "cosh(x)"])]
        ev = wronskian(cs, 2, 1, 0.5)
        np.testing.assert_allclose(ev.matrix, [[np.exp(0.5), 1], [0.5, np.cosh(0.5)]])


class TestBuild:
    def test_e1_coefficients(self, e1):
        _, _, Q, _ = e1
        C = Q.coefficients(XS)
        np.testing.assert_allclose(C[:, 0, 0, 0], -np.tanh(XS), atol=1e-14)
        np.testing.assert_allclose(C[:, 1, 0, 0], 1)

    def test_e1_coefficient_derivatives(self, e1):
        _, _, Q, _ = e1
        J = Q.coefficient_jet(XS, 3)[:, :, 0, 0, 0]
        t = np.tanh(XS)
        np.testing.assert_allclose(J[1], -(1 - t ** 2), atol=1e-13)
        np.testing.assert_allclose(J[2], 2 * t * (1 - t ** 2), atol=1e-13)
        np.testing.assert_allclose(J[3], 2 * (1 - t ** 2) * (1 - 3 * t ** 2), atol=1e-12)

    def test_counterexample(self):
        cs = [chain(1, ["exp(1i*x)", "0"]), chain(4, ["exp(2i*x)", "0"])]
        with pytest.raises(SingularWronskian) as info:
            build_intertwiner(MatrixHamiltonian.free(2), cs)
        assert info.value.code == "SingularWronskian"

    def test_e2_constant_coefficients(self, e2):
        _, _, Q, _ = e2
        C = Q.coefficients(XS)[:, :, 0, 0]
        np.testing.assert_allclose(C[:, 0], -1, atol=1e-13)
        np.testing.assert_allclose(C[:, 1], 0, atol=1e-13)
        np.testing.assert_allclose(C[:, 2], 1)

    def test_two_step_against_symbolic(self, free1):
        Q = build_intertwiner(free1, [chain(-1, "cosh(x)"), chain(-4, "sinh(2*x)")])
        Hm = final_potential(free1, Q)
        for x, a1, a0, v in TWO_STEP_ORACLE:
            C = Q.coefficients(x)[0, :, 0, 0]
            assert C[1] == pytest.approx(a1, abs=1e-12)
            assert C[0] == pytest.approx(a0, abs=1e-12)
            assert Hm.potential(x)[0, 0, 0] == pytest.approx(v, abs=1e-11)

    def test_sinh_rejected(self, free1):
        with pytest.raises(SingularWronskian) as info:
            build_intertwiner(free1, [chain(-1, "sinh(x)")])
        assert info.value.x == pytest.approx(0.0)

    def test_singular_leading(self, free1):
        with pytest.raises(SingularLeading):
            build_intertwiner(MatrixHamiltonian.free(2), [chain(1, ["exp(x)", "1"]), chain(2, ["1", "exp(x)"])],
                              leading=[[1, 2], [2, 4]])

    def test_dimension_checks(self, free1):
        with pytest.raises(DimensionMismatch):
            build_intertwiner(free1, [chain(1, ["exp(x)", "1"]), chain(2, ["1", "exp(x)"])])
        with pytest.raises(CountMismatch):
            build_intertwiner(MatrixHamiltonian.free(2), [chain(1, ["exp(x)", "1"])])

    def test_order_zero(self, free1):
        Q = build_intertwiner(free1, ChainSet([]), leading=[[3.0]])
        assert Q.order == 0
        assert apply_operator(Q, VectorFunction(["x"]), 2.0)[0] == pytest.approx(6)

    def test_matrix_scalar_route(self):
        # n=2, N=1: X_0 = -Phi' Phi^-1 with Phi = [phi_1 phi_2]
        cs = [chain(1, ["exp(x)", "1"]), chain(2, ["sin(x)", "cosh(x) + 1"])]
        Q = build_intertwiner(MatrixHamiltonian.free(2), cs, window=Window(-2, 2, 41))
        xs = Window(-2, 2, 41).points()
        J0 = np.stack([m.jet(xs, 1)[0] for m in cs[0].members + cs[1].members], axis=-1)
        J1 = np.stack([m.jet(xs, 1)[1] for m in cs[0].members + cs[1].members], axis=-1)
        oracle = -J1 @ np.linalg.inv(J0)
        np.testing.assert_allclose(Q.coefficients(xs)[:, 0], oracle, atol=1e-12)

    def test_determinant_and_solve_routes_agree(self, long_chain):
        Q = build_intertwiner(MatrixHamiltonian.free(2), [long_chain], window=Window(-3, 3, 31))
        xs = Window(-3, 3, 31).points()
        np.testing.assert_allclose(Q.coefficients(xs), Q.solve_coefficients(xs), atol=1e-10)

    def test_recursion_matches_finite_differences(self, long_chain):
        Q = build_intertwiner(MatrixHamiltonian.free(2), [long_chain], window=Window(-3, 3, 31))
        x0, h = 0.4, 1e-3
        J = Q.coefficient_jet(np.array([x0]), 3)[:, 0]
        f = lambda x: Q.solve_coefficients(np.array([x]))[0]
        d2 = (f(x0 + h) - 2 * f(x0) + f(x0 - h)) / h ** 2
        d3 = (f(x0 + 2 * h) - 2 * f(x0 + h) + 2 * f(x0 - h) - f(x0 - 2 * h)) / (2 * h ** 3)
        np.testing.assert_allclose(J[2], d2, atol=1e-5)
        np.testing.assert_allclose(J[3], d3, atol=1e-3)


class TestFinalPotential:
    def test_soliton(self, e1):
        _, _, _, Hm = e1
        np.testing.assert_allclose(Hm.potential(XS)[:, 0, 0], -2 * SECH2, atol=1e-12)

    def test_e2_unchanged(self, e2):
        _, _, _, Hm = e2
        np.testing.assert_allclose(Hm.potential(XS), 0, atol=1e-12)

    def test_scalar_leading_cancels(self, free1):
        cs = [chain(-1, "cosh(x)")]
        a = final_potential(free1, build_intertwiner(free1, cs)).potential(XS)
        b = final_potential(free1, build_intertwiner(free1, cs, leading=[[2.5 - 1j]])).potential(XS)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_left_multiplication_covariance(self):
        # Q -> A Q gives V- -> A V- A^-1
        cs = [chain(1, ["exp(x)", "1"]), chain(2, ["sin(x)", "cosh(x) + 1"])]
        H = MatrixHamiltonian.free(2)
        A = np.array([[2, 1j], [0.5, 1]])
        w = Window(-2, 2, 21)
        V1 = final_potential(H, build_intertwiner(H, cs, window=w)).potential(w.points())
        V2 = final_potential(H, build_intertwiner(H, cs, leading=A, window=w)).potential(w.points())
        np.testing.assert_allclose(V2, A @ V1 @ np.linalg.inv(A), atol=1e-10)


class TestApply:
    def test_kernel_member(self, e1):
        _, _, Q, _ = e1
        assert abs(apply_operator(Q, VectorFunction(["cosh(x)"]), 1.3)[0]) < 1e-14

    def test_sinh_to_sech(self, e1):
        _, _, Q, _ = e1
        assert apply_operator(Q, VectorFunction(["sinh(x)"]), 0.9)[0] == pytest.approx(1 / np.cosh(0.9))

    def test_e2(self, e2):
        _, _, Q, _ = e2
        assert apply_operator(Q, VectorFunction(["exp(2*x)"]), 0.0)[0] == pytest.approx(3)

    def test_vectorized_shape(self, e1):
        _, _, Q, _ = e1
        assert apply_operator(Q, VectorFunction(["x"]), XS).shape == (len(XS), 1)


class TestResiduals:
    def test_e1_intertwining(self, e1):
        H, cs, Q, Hm = e1
        tests = [VectorFunction(["exp(x)"]), VectorFunction(["sin(2*x)"])]
        assert intertwining_residual(Q, H, Hm, tests, XS).residual <= 1e-8
        assert kernel_residual(Q, cs[0].members, XS).residual <= 1e-12

    def test_e2_commutes(self, e2):
        H, _, Q, Hm = e2
        assert intertwining_residual(Q, H, Hm, default_test_functions(1), XS).residual <= 1e-12

    def test_perturbation_detected(self, e1):
        H, _, Q, _ = e1
        wrong = MatrixHamiltonian([["-1.9*cosh(x)^(2)/cosh(x)^4"]])
        tests = [VectorFunction(["exp(x)"]), VectorFunction(["sin(2*x)"])]
        assert intertwining_residual(Q, H, wrong, tests, XS).residual >= 1e-2

    def test_constant_operator_commutes_with_free(self):
        H = MatrixHamiltonian.free(2)
        Q = ConstantOperator([np.eye(2), [[0, 1], [1, 0]], [[2, 0], [0, 1j]]])
        assert intertwining_residual(Q, H, H, default_test_functions(2), XS).residual < 1e-10


def test_wronskian_values_threshold(e1):
    _, cs, _, _ = e1
    W, thr = wronskian_values(cs[0].members, 1, 1, XS)
    np.testing.assert_allclose(W, np.cosh(XS))
    assert np.all(np.abs(W) > thr)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 2.5), st.floats(0.2, 5.0), st.floats(0.2, 5.0))
def test_scalar_first_order_oracle(k, a, b):
    # phi = a e^{kx} + b e^{-kx} > 0: X_0 = -phi'/phi and V- = -2 (ln phi)''
    H = MatrixHamiltonian.free(1)
    w = Window(-3, 3, 61)
    xs = w.points()
    phi = a * np.exp(k * xs) + b * np.exp(-k * xs)
    dphi = k * (a * np.exp(k * xs) - b * np.exp(-k * xs))
    Q = build_intertwiner(H, [chain(-k * k, f"{a}*exp({k}*x) + {b}*exp(-{k}*x)")], window=w)
    np.testing.assert_allclose(Q.coefficients(xs)[:, 0, 0, 0], -dphi / phi, atol=1e-12 * (1 + k))
    lnpp = (k * k * phi * phi - dphi ** 2) / phi ** 2
    Vm = final_potential(H, Q).potential(xs)[:, 0, 0]
    np.testing.assert_allclose(Vm, -2 * lnpp, atol=1e-10 * (1 + k * k))
    rep = intertwining_residual(Q, H, final_potential(H, Q), default_test_functions(1), w, 1e-8)
    assert rep.passed
