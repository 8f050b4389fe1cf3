"""Intertwining operators built from chains via Wronskian determinants.

For kernel members ``Phi_1..Phi_nN`` the Wronskian matrix has row ``l``

    (phi_l1 .. phi_ln, phi'_l1 .. phi'_ln, ..., phi^(N-1)_l1 .. phi^(N-1)_ln)

and column ``l`` of ``X_j`` is ``-X_N v / W`` where component ``m`` of ``v``
is the determinant of that matrix with column ``(j, l)`` replaced by the
``N``-th derivatives of component ``m``. Coefficients are evaluated pointwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from . import numkit
from .errors import CountMismatch, DimensionMismatch, SingularLeading, SingularWronskian
from .schrodinger import JetCache, SchrodingerHamiltonian, VectorFunction, as_chainset, grid_points

WRONSKIAN_RTOL = 1e-10
LEADING_RTOL = 1e-12


@dataclass(frozen=True)
class Window:
    xmin: float = -5.0
    xmax: float = 5.0
    count: int = 201

    def points(self) -> np.ndarray:
        return np.linspace(self.xmin, self.xmax, self.count)

    def as_dict(self):
        return {"xmin": self.xmin, "xmax": self.xmax, "points": self.count}


DEFAULT_WINDOW = Window()


def _grid(window):
    if window is None:
        return DEFAULT_WINDOW.points()
    if isinstance(window, Window):
        return window.points()
    return grid_points(window)


@dataclass
class WronskianEvaluation:
    x: float
    matrix: np.ndarray
    det: complex


def _member_jets(members, xs, order):
    """Stacked jets, shape ``(len(members), order + 1, len(xs), n)``."""
    return np.stack([m.jet(xs, order) for m in members])


def _wronskian_matrix(J, N, k=0):
    """k-th derivative of the Wronskian matrix, shape ``(m, nN, nN)``."""
    d, _, m, n = J.shape
    block = J[:, k:k + N]  # (d, N, m, n)
    return block.transpose(2, 0, 1, 3).reshape(m, d, N * n)


def _top_derivatives(J, N, k=0):
    """k-th derivative of the N-th derivative rows, shape ``(m, nN, n)``."""
    return J[:, N + k].transpose(1, 0, 2)


def _replaced_columns(Wm, F):
    """``out[p, k, c]`` is ``Wm[p]`` with column ``k`` replaced by ``F[p, :, c]``."""
    m, nN, _ = Wm.shape
    n = F.shape[-1]
    out = np.broadcast_to(Wm[:, None, None], (m, nN, n, nN, nN)).copy()
    cols = np.arange(nN)
    # advanced indices on axes 1 and 4 move to the front: target shape (k, p, c, row)
    out[:, cols, :, :, cols] = F.transpose(0, 2, 1)[None]
    return out


def wronskian(cs, n: int, N: int, x) -> WronskianEvaluation:
    members = as_chainset(cs).members
    if len(members) != n * N:
        raise CountMismatch(f"{len(members)} chain members, expected n*N={n * N}")
    xs = grid_points(x)
    J = _member_jets(members, xs, N - 1) if members else None
    M = _wronskian_matrix(J, N)[0] if members else np.zeros((0, 0), dtype=complex)
    return WronskianEvaluation(float(xs[0]), M, complex(numkit.lu_det(M)))


def wronskian_values(members, n, N, x, rtol=WRONSKIAN_RTOL):
    """``(W(x), threshold(x))`` on an array of points."""
    xs = grid_points(x)
    if not members:
        return np.ones(len(xs), dtype=complex), np.zeros(len(xs))
    if len(members) != n * N:
        raise CountMismatch(f"{len(members)} chain members, expected n*N={n * N}")
    M = _wronskian_matrix(_member_jets(members, xs, N - 1), N)
    return numkit.lu_det(M), rtol * numkit.hadamard_bound(M)


class DifferentialOperator:
    """``sum_j X_j(x) d^j`` for ``j = 0..order``; subclasses supply ``coefficient_jet``."""

    n: int
    order: int

    def coefficient_jet(self, x, order: int) -> np.ndarray:
        """Derivatives of all coefficients, shape ``(order+1, m, self.order+1, n, n)``."""
        raise NotImplementedError

    def coefficients(self, x) -> np.ndarray:
        return self.coefficient_jet(grid_points(x), 0)[0]

    def apply_jet(self, fjet, order, x):
        """Derivatives ``0..order`` of ``Q f`` from the jet of ``f``."""
        if fjet.shape[0] < self.order + order + 1:
            raise ValueError("jet too short for operator")
        if fjet.shape[-1] != self.n:
            raise DimensionMismatch(f"function has {fjet.shape[-1]} components, operator has n={self.n}")
        C = self.coefficient_jet(x, order)
        out = np.zeros((order + 1,) + fjet.shape[1:], dtype=complex)
        for k in range(order + 1):
            for i in range(k + 1):
                w = comb(k, i)
                for j in range(self.order + 1):
                    out[k] += w * np.einsum("pab,pb->pa", C[i, :, j], fjet[j + k - i])
        return out

    def image(self, f) -> "OperatorImage":
        return OperatorImage(self, f)

    def __call__(self, f, x):
        return apply_operator(self, f, x)


class OperatorImage:
    """The function-like ``Q f``."""

    def __init__(self, op, f):
        if f.n != op.n:
            raise DimensionMismatch(f"function has {f.n} components, operator has n={op.n}")
        self.op, self.f, self.n = op, f, op.n

    def jet(self, x, order):
        xs = grid_points(x)
        return self.op.apply_jet(self.f.jet(xs, order + self.op.order), order, xs)


class ConstantOperator(DifferentialOperator):
    """Operator with constant matrix coefficients ``[X_0, ..., X_order]``."""

    def __init__(self, coefficients):
        C = np.asarray(coefficients, dtype=complex)
        if C.ndim != 3 or C.shape[1] != C.shape[2]:
            raise ValueError("expected a list of square matrices")
        self.C = C
        self.n = C.shape[1]
        self.order = C.shape[0] - 1

    @property
    def leading(self):
        return self.C[-1]

    def coefficient_jet(self, x, order):
        xs = grid_points(x)
        out = np.zeros((order + 1, len(xs)) + self.C.shape, dtype=complex)
        out[0] = self.C
        return out


class IntertwiningOperator(DifferentialOperator):
    """Order-N operator with constant leading ``X_N`` and kernel containing the chains.

    ``coefficient_jet`` evaluates the coefficients by determinant ratios, their
    first derivatives by the quotient rule with Jacobi's formula for the
    determinant derivatives, and higher derivatives by differentiating
    ``Y W^t = -X_N F^t`` (``Y = [X_0 .. X_(N-1)]``) with Leibniz' rule.
    """

    def __init__(self, chains, n, N, leading, hamiltonian=None, window=None, rtol=WRONSKIAN_RTOL):
        self.chains = chains
        self.members = chains.members
        self.n, self.order = n, N
        self.leading = leading
        self.hamiltonian = hamiltonian
        self.window = window
        self.rtol = rtol
        self._cache = JetCache()

    @property
    def N(self):
        return self.order

    def with_leading(self, leading) -> "IntertwiningOperator":
        """Same kernel, new leading coefficient (all coefficients left-multiplied)."""
        return IntertwiningOperator(self.chains, self.n, self.order, np.asarray(leading, dtype=complex),
                                    self.hamiltonian, self.window, self.rtol)

    def wronskian(self, x):
        W, _ = wronskian_values(self.members, self.n, self.order, x, self.rtol)
        return W

    def _check(self, xs, W, M):
        thr = self.rtol * numkit.hadamard_bound(M)
        bad = np.abs(W) <= thr
        if bad.any():
            i = int(np.argmax(bad))
            raise SingularWronskian(float(xs[i]), complex(W[i]), float(thr[i]))

    def coefficient_jet(self, x, order):
        xs = grid_points(x)
        return self._cache.get(xs, order, lambda: self._coefficient_jet(xs, order))

    def _coefficient_jet(self, xs, order):
        n, N, m = self.n, self.order, len(xs)
        out = np.zeros((order + 1, m, N + 1, n, n), dtype=complex)
        out[0, :, N] = self.leading
        if N == 0:
            return out
        nN = n * N
        J = _member_jets(self.members, xs, N + order)
        Wm = _wronskian_matrix(J, N)
        W = numkit.lu_det(Wm)
        self._check(xs, W, Wm)
        F = _top_derivatives(J, N)

        # value: Cramer determinants, one per (column (j,l), component c)
        rep = _replaced_columns(Wm, F)
        D = numkit.lu_det(rep)  # (m, nN, n)
        Y = -np.einsum("rc,pkc->prk", self.leading, D) / W[:, None, None]
        Ys = [Y]

        if order >= 1:
            Wm1 = _wronskian_matrix(J, N, 1)
            F1 = _top_derivatives(J, N, 1)
            rep1 = _replaced_columns(Wm1, F1)
            D1 = numkit.det_derivative(rep, rep1)
            W1 = numkit.det_derivative(Wm, Wm1)
            quot = (D1 * W[:, None, None] - D * W1[:, None, None]) / (W ** 2)[:, None, None]
            Ys.append(-np.einsum("rc,pkc->prk", self.leading, quot))

        WmT = [_wronskian_matrix(J, N, k).transpose(0, 2, 1) for k in range(order + 1)]
        for k in range(2, order + 1):
            Fk = _top_derivatives(J, N, k)
            R = -np.einsum("rc,plc->prl", self.leading, Fk)
            for i in range(k):
                R -= comb(k, i) * Ys[i] @ WmT[k - i]
            # Y^(k) W^t = R  <=>  W Y^(k)^t = R^t
            Ys.append(np.linalg.solve(Wm, R.transpose(0, 2, 1)).transpose(0, 2, 1))

        for k, Yk in enumerate(Ys):
            out[k, :, :N] = Yk.reshape(m, n, N, n).transpose(0, 2, 1, 3)
        return out

    def solve_coefficients(self, x):
        """Coefficients by one linear solve per point (independent of the determinant route)."""
        xs = grid_points(x)
        n, N = self.n, self.order
        J = _member_jets(self.members, xs, N)
        Wm = _wronskian_matrix(J, N)
        F = _top_derivatives(J, N)
        R = -np.einsum("rc,plc->prl", self.leading, F)
        Y = np.linalg.solve(Wm, R.transpose(0, 2, 1)).transpose(0, 2, 1)
        out = np.zeros((len(xs), N + 1, n, n), dtype=complex)
        out[:, :N] = Y.reshape(len(xs), n, N, n).transpose(0, 2, 1, 3)
        out[:, N] = self.leading
        return out


def build_intertwiner(H: SchrodingerHamiltonian | None, cs, leading=None, window=None,
                      rtol=WRONSKIAN_RTOL, n=None) -> IntertwiningOperator:
    """Operator with leading coefficient ``leading`` whose kernel holds every chain member.

    Raises ``SingularLeading`` for a degenerate leading coefficient and
    ``SingularWronskian`` at the first window point where ``|W|`` drops below
    ``rtol`` times the product of the Wronskian-matrix row norms.
    """
    cs = as_chainset(cs)
    n = n or cs.n or (H.n if H is not None else None)
    if n is None:
        raise DimensionMismatch("cannot infer n from an empty chain set without a Hamiltonian")
    if H is not None and H.n != n:
        raise DimensionMismatch(f"chains have n={n}, Hamiltonian has order {H.n}")
    if cs.d % n:
        raise CountMismatch(f"{cs.d} chain members is not a multiple of n={n}")
    N = cs.d // n
    X_N = np.eye(n, dtype=complex) if leading is None else np.asarray(leading, dtype=complex)
    if X_N.shape != (n, n):
        raise DimensionMismatch(f"leading coefficient must be {n}x{n}")
    try:
        numkit.inverse(X_N, LEADING_RTOL)
    except numkit.SingularMatrix as exc:
        raise SingularLeading(str(exc)) from None
    xs = _grid(window)
    Q = IntertwiningOperator(cs, n, N, X_N, H, window, rtol)
    if N:
        W, thr = wronskian_values(cs.members, n, N, xs, rtol)
        bad = np.abs(W) <= thr
        if bad.any():
            i = int(np.argmax(bad))
            raise SingularWronskian(float(xs[i]), complex(W[i]), float(thr[i]))
    return Q


class TransformedHamiltonian(SchrodingerHamiltonian):
    """``H- = -d^2 + V-`` with ``V- = X_N V+ X_N^-1 + 2 X'_(N-1) X_N^-1``."""

    def __init__(self, H_plus: SchrodingerHamiltonian, Q):
        self.H_plus = H_plus
        self.Q = Q
        self.n = H_plus.n
        self._Xinv = numkit.inverse(Q.leading, LEADING_RTOL)

    def potential_jet(self, x, order):
        xs = grid_points(x)
        Vp = self.H_plus.potential_jet(xs, order)
        X_N, Xi = self.Q.leading, self._Xinv
        out = np.einsum("ab,kpbc,cd->kpad", X_N, Vp, Xi)
        N = self.Q.order
        if N:
            C = self.Q.coefficient_jet(xs, order + 1)
            out += 2 * np.einsum("kpab,bc->kpac", C[1:, :, N - 1], Xi)
        return out


def final_potential(H_plus: SchrodingerHamiltonian, Q: DifferentialOperator) -> TransformedHamiltonian:
    return TransformedHamiltonian(H_plus, Q)


def apply_operator(Q: DifferentialOperator, phi, x):
    """``sum_j X_j(x) phi^(j)(x)``; shape ``(n,)`` for scalar ``x``, else ``(m, n)``."""
    xs = grid_points(x)
    if phi.n != Q.n:
        raise DimensionMismatch(f"function has {phi.n} components, operator has n={Q.n}")
    val = Q.apply_jet(phi.jet(xs, Q.order), 0, xs)[0]
    return val[0] if np.ndim(x) == 0 else val


@dataclass
class ResidualReport:
    residual: float
    scale: float
    tolerance: float

    @property
    def bound(self) -> float:
        return self.tolerance * max(1.0, self.scale)

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.bound)

    def as_dict(self):
        return {"residual": self.residual, "scale": self.scale, "tolerance": self.tolerance,
                "bound": self.bound, "passed": self.passed}


def _maxabs(a) -> float:
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


def kernel_residual(Q: DifferentialOperator, members, grid=None, tol=1e-8) -> ResidualReport:
    """Largest ``|Q Phi|`` over kernel members; scale is the largest single term ``|X_j Phi^(j)|``."""
    xs = _grid(grid)
    C = Q.coefficients(xs)
    worst = scale = 0.0
    for phi in members:
        fj = phi.jet(xs, Q.order)
        terms = np.einsum("pjab,jpb->jpa", C, fj)
        worst = max(worst, _maxabs(terms.sum(axis=0)))
        scale = max(scale, _maxabs(terms))
    return ResidualReport(worst, scale, tol)


def intertwining_residual(Q, H_plus, H_minus, tests, grid=None, tol=1e-8) -> ResidualReport:
    """``max |Q(H+ f) - H-(Q f)|`` over test functions and grid points."""
    xs = _grid(grid)
    worst = scale = 0.0
    N = Q.order
    for f in tests:
        fj = f.jet(xs, N + 2)
        lhs = Q.apply_jet(H_plus.apply_jet(fj, N, xs), 0, xs)[0]
        qj = Q.apply_jet(fj, 2, xs)
        rhs = H_minus.apply_jet(qj, 0, xs)[0]
        worst = max(worst, _maxabs(lhs - rhs))
        scale = max(scale, _maxabs(lhs), _maxabs(rhs), _maxabs(qj[2]))
    return ResidualReport(worst, scale, tol)


def operator_difference(A, B, tests, grid=None, tol=1e-8) -> ResidualReport:
    """``max |A f - B f|`` for function-like ``A f``/``B f`` pairs; ``tests`` are ``(Af, Bf)``."""
    xs = _grid(grid)
    worst = scale = 0.0
    for f in tests:
        a = A(f).jet(xs, 0)[0]
        b = B(f).jet(xs, 0)[0]
        worst = max(worst, _maxabs(a - b))
        scale = max(scale, _maxabs(a), _maxabs(b))
    return ResidualReport(worst, scale, tol)


def default_test_functions(n: int) -> list:
    """Generic smooth vector-functions that are not in any kernel used here."""
    tests = []
    for c in range(n):
        for text in ("exp(0.5*x)", "sin(2*x)", "cos(1.3*x)*x"):
            comps = ["0"] * n
            comps[c] = text
            tests.append(VectorFunction(comps))
    if n > 1:
        tests.append(VectorFunction([f"cos({0.7 + 0.3 * c}*x) + {c + 1}" for c in range(n)]))
    return tests
