import numpy as np
import pytest

from intertwine.construct import Window, build_intertwiner
from intertwine.errors import FactorInconsistent
from intertwine.minimize import MinimizationCertificate, minimizable_factors, minimize, reduce_chains
from intertwine.schrodinger import MatrixHamiltonian, SpectralSummary, spectral_summary

from conftest import E1_WINDOW, chain

XS = E1_WINDOW.points()


def test_e2_certificate():
    cert = minimizable_factors(SpectralSummary.from_orders({-1: [1, 1]}, 1))
    assert cert.factors == ((-1, 1),)
    assert cert.M == 0 and cert.minimizable


def test_single_long_chain_not_minimizable():
    cert = minimizable_factors(SpectralSummary.from_orders({1: [4]}, 2))
    assert cert.factors == () and not cert.minimizable


def test_unequal_blocks_use_smallest_order():
    cert = minimizable_factors(SpectralSummary.from_orders({0: [2, 1]}, 1))
    assert cert.factors == ((0, 1),) and cert.M == 1


def test_matrix_case_needs_2n_blocks():
    assert not minimizable_factors(SpectralSummary.from_orders({3: [1, 1]}, 2)).minimizable
    cert = minimizable_factors(SpectralSummary.from_orders({3: [2, 1, 1, 1], 5: [1]}, 2))
    assert cert.factors == ((3, 1),) and cert.N == 3 and cert.M == 1


def test_e2_minimize_gives_identity(e2):
    H, cs, Q, _ = e2
    cert = minimizable_factors(spectral_summary(cs))
    P, report = minimize(H, cs, cert, window=E1_WINDOW, Q=Q)
    assert P.order == 0
    np.testing.assert_allclose(P.coefficients(XS)[:, 0], np.broadcast_to(np.eye(1), (len(XS), 1, 1)))
    assert report.residual <= 1e-12
    assert cert.polynomial_roots == [-1]


def test_cosh_with_exponential_pair(free1):
    cs = [chain(-1, "cosh(x)"), chain(-4, "exp(2*x)"), chain(-4, "exp(-2*x)")]
    cert = minimizable_factors(spectral_summary(cs))
    assert cert.factors == ((-4, 1),) and cert.M == 1
    res = minimize(free1, cs, cert, window=E1_WINDOW)
    np.testing.assert_allclose(res.P.coefficients(XS)[:, 0, 0, 0], -np.tanh(XS), atol=1e-12)
    assert res.report.passed and res.report.residual <= 1e-8 * max(1, res.report.scale)


def test_generalized_chain(free1):
    cs = [chain(0, "1", "-x^2/2"), chain(0, "x")]
    cert = minimizable_factors(spectral_summary(cs))
    res = minimize(free1, cs, cert, window=Window(-2, 2, 41))
    C = res.P.coefficients(Window(-2, 2, 41).points())
    assert res.P.order == 1
    np.testing.assert_allclose(C[:, 0, 0, 0], 0, atol=1e-12)
    assert res.report.passed


def test_empty_factors_rejected(e1):
    H, cs, _, _ = e1
    with pytest.raises(FactorInconsistent):
        minimize(H, cs, MinimizationCertificate((), 1))


def test_wrong_factor_count_rejected(free1):
    cs = [chain(-1, "cosh(x)"), chain(-4, "exp(2*x)"), chain(-4, "exp(-2*x)")]
    with pytest.raises(FactorInconsistent):
        minimize(free1, cs, MinimizationCertificate(((-1, 1),), 3))


def test_reduce_chains_drops_factored_members(free1):
    cs = [chain(0, "1", "-x^2/2"), chain(0, "x")]
    red = reduce_chains(free1, cs, ((0, 1),), Window(-2, 2, 21))
    assert red.d == 1
    np.testing.assert_allclose(red.members[0].jet(np.array([0.3]), 0)[0, 0, 0], -1)


def test_matrix_round_trip():
    # V+ = diag(0, 1); (lam - H+) factor at lam = -1 with all four solutions
    H = MatrixHamiltonian([["0", "0"], ["0", "1"]])
    s2 = np.sqrt(2)
    cs = [chain(-1, ["exp(x)", "0"]), chain(-1, ["exp(-x)", "0"]),
          chain(-1, ["0", f"cosh({s2}*x)"]), chain(-1, ["0", f"sinh({s2}*x)"]),
          chain(-0.25, ["cosh(0.5*x)", "0"]), chain(0.75, ["0", "exp(0.5*x)"])]
    w = Window(-1, 1, 21)
    Q = build_intertwiner(H, cs, window=w)
    cert = minimizable_factors(spectral_summary(cs))
    assert cert.factors == ((-1, 1),) and cert.M == 1
    res = minimize(H, cs, cert, window=w, Q=Q)
    assert res.report.passed
