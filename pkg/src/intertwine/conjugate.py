"""Conjugate intertwiner, SUSY polynomial and the polynomial superalgebra checks.

The conjugate ``Q+`` (with ``H+ Q+ = Q+ H-``) is built from the images under
``Q-`` of a full solution basis of ``prod (H+ - lam_l)^kappa_l``. Those images
are chains of ``H-``, so the ordinary Wronskian builder applies.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import numkit
from .construct import (
    LEADING_RTOL, DifferentialOperator, ResidualReport, _grid, _maxabs, build_intertwiner,
    default_test_functions, intertwining_residual, kernel_residual,
)
from .errors import (
    ExtensionCountMismatch, FactorInconsistent, IntertwineError, NormalizationFailure,
    SymmetryViolated,
)
from .schrodinger import (
    AssociationChain, ChainSet, PolynomialImage, SpectralSummary, ZeroFunction, as_chainset,
    grid_points, group_by_lambda, same_lambda, spectral_summary, verify_chain,
)

ZERO_RTOL = 1e-10
SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True)
class SusyPolynomial:
    roots: tuple  # ((lam, kappa), ...)

    @property
    def degree(self) -> int:
        return sum(k for _, k in self.roots)

    def __call__(self, lam):
        out = 1
        for r, k in self.roots:
            out = out * (lam - r) ** k
        return out

    def coefficients(self) -> np.ndarray:
        """Monic coefficients, highest power first."""
        return np.poly([r for r, k in self.roots for _ in range(k)])

    def apply(self, H, f) -> PolynomialImage:
        return PolynomialImage(H, self.roots, f)

    def conjugate_order(self, N: int) -> int:
        return 2 * self.degree - N

    def as_dict(self):
        return {"roots": [{"lambda": [l.real, l.imag], "kappa": k} for l, k in self.roots],
                "degree": self.degree}


def susy_polynomial(summary: SpectralSummary) -> tuple:
    """``(P, N')`` with ``P(lam) = prod (lam - lam_l)^kappa_l`` and ``N' = 2 deg P - N``."""
    P = SusyPolynomial(tuple((e.lam, e.kappa) for e in summary.entries))
    return P, P.conjugate_order(summary.N)


class InvalidExtension(IntertwineError):
    code = "InvalidExtension"


@dataclass
class ExtensionBasis:
    """Chains of ``H+``; at every ``lam_l`` there must be ``2n`` chains of length ``kappa_l``."""

    chains: list = field(default_factory=list)

    def validate(self, H, summary: SpectralSummary, grid=None, tol=1e-10):
        xs = _grid(grid)
        n = summary.n
        groups = group_by_lambda(self.chains)
        for lam, _ in groups:
            if not any(same_lambda(lam, e.lam) for e in summary.entries):
                raise InvalidExtension(f"extension chain at lambda={lam} is not a spectral value of T+")
        for e in summary.entries:
            chains = next((g for l, g in groups if same_lambda(l, e.lam)), [])
            if len(chains) != 2 * n or any(len(c) != e.kappa for c in chains):
                raise ExtensionCountMismatch(
                    f"lambda={e.lam}: need {2 * n} chains of length {e.kappa}, "
                    f"got lengths {[len(c) for c in chains]}")
        for c in self.chains:
            report = verify_chain(H, c, xs, tol)
            if not report.passed:
                raise InvalidExtension(f"extension chain at lambda={c.lam} fails: "
                                       f"residual {report.max_residual:.3e}")


def image_chains(Q, chains, grid=None, zero_rtol=ZERO_RTOL) -> ChainSet:
    """``Q`` applied to each chain; vanishing leading images are dropped."""
    xs = _grid(grid)
    out = []
    for chain in chains:
        alive = []
        for member in chain.members:
            rep = kernel_residual(Q, [member], xs)
            alive.append(rep.residual > zero_rtol * max(rep.scale, 1e-300))
        if any(alive):
            cut = alive.index(True)
            if not all(alive[cut:]):
                raise FactorInconsistent(f"images of the chain at lambda={chain.lam} vanish out of order")
            out.append(AssociationChain(chain.lam, [Q.image(m) for m in chain.members[cut:]]))
    return ChainSet(out)


def _fit_scalar(a_vals, b_vals) -> complex:
    a = np.concatenate([v.ravel() for v in a_vals])
    b = np.concatenate([v.ravel() for v in b_vals])
    denom = np.vdot(a, a)
    if denom == 0:
        raise NormalizationFailure("Q+ Q- vanishes on every test function")
    return complex(np.vdot(a, b) / denom)


@dataclass
class ConjugateResult:
    operator: DifferentialOperator
    polynomial: SusyPolynomial
    scale_factor: complex
    report: ResidualReport
    images: ChainSet


def build_conjugate(H_plus, H_minus, cs, ext: ExtensionBasis, Q_minus, window=None, tests=None,
                    tol=1e-8, zero_rtol=ZERO_RTOL) -> ConjugateResult:
    """Construct ``Q+`` with ``Q+ Q- = P(H+)`` for the monic SUSY polynomial ``P``."""
    cs = as_chainset(cs)
    n = cs.n
    xs = _grid(window)
    summary_ = spectral_summary(cs)
    P, N_conj = susy_polynomial(summary_)
    ext.validate(H_plus, summary_, xs)
    images = image_chains(Q_minus, ext.chains, xs, zero_rtol)
    if images.d != n * N_conj:
        raise ExtensionCountMismatch(f"{images.d} surviving images, expected n*N'={n * N_conj}")
    # Q+ Q- has leading coefficient X+ X-, P(H+) has (-1)^deg I
    leading = (-1) ** P.degree * numkit.inverse(Q_minus.leading, LEADING_RTOL)
    Q_plus = build_intertwiner(H_minus, images, leading, window, n=n)
    tests = tests or default_test_functions(n)
    lhs = [Q_plus.image(Q_minus.image(f)).jet(xs, 0)[0] for f in tests]
    rhs = [P.apply(H_plus, f).jet(xs, 0)[0] for f in tests]
    c = _fit_scalar(lhs, rhs)
    Q_plus = Q_plus.with_leading(c * leading)
    worst = max(_maxabs(c * a - b) for a, b in zip(lhs, rhs))
    scale = max(max(_maxabs(a) * abs(c), _maxabs(b)) for a, b in zip(lhs, rhs))
    report = ResidualReport(worst, scale, tol)
    if not report.passed:
        raise NormalizationFailure(f"no scalar makes Q+ Q- = P(H+): residual {worst:.3e} "
                                   f"(bound {report.bound:.3e}); extension basis invalid?")
    return ConjugateResult(Q_plus, P, c, report, images)


class SymmetryConjugate(DifferentialOperator):
    """``sum_j (-d)^j o X_j^op`` (hermitian/transpose) or ``sum_j conj(X_j) d^j``."""

    def __init__(self, base: DifferentialOperator, mode: str):
        if mode not in ("hermitian", "transpose", "complex_conjugate"):
            raise ValueError(f"unknown mode {mode!r}")
        self.base, self.mode = base, mode
        self.n, self.order = base.n, base.order

    @property
    def leading(self):
        X = np.asarray(self.base.leading)
        if self.mode == "complex_conjugate":
            return X.conj()
        X = X.conj().T if self.mode == "hermitian" else X.T
        return (-1) ** self.order * X

    def coefficient_jet(self, x, order):
        xs = grid_points(x)
        N = self.order
        B = self.base.coefficient_jet(xs, order + (0 if self.mode == "complex_conjugate" else N))
        if self.mode == "complex_conjugate":
            return B.conj()
        B = np.swapaxes(B, -1, -2)
        if self.mode == "hermitian":
            B = B.conj()
        # (-d)^j o X(x) = (-1)^j sum_k C(j,k) X^(j-k) d^k
        out = np.zeros((order + 1, len(xs), N + 1, self.n, self.n), dtype=complex)
        for r in range(order + 1):
            for k in range(N + 1):
                for j in range(k, N + 1):
                    out[r, :, k] += (-1) ** j * comb(j, k) * B[j - k + r, :, j]
        return out


def symmetry_defect(H_plus, H_minus, mode, grid=None) -> tuple:
    """``(defect, scale)`` of the symmetry that licenses ``mode``."""
    xs = _grid(grid)
    Vp, Vm = H_plus.potential(xs), H_minus.potential(xs)
    if mode == "hermitian":
        d = max(_maxabs(Vp - Vp.conj().swapaxes(-1, -2)), _maxabs(Vm - Vm.conj().swapaxes(-1, -2)))
    elif mode == "transpose":
        d = max(_maxabs(Vp - Vp.swapaxes(-1, -2)), _maxabs(Vm - Vm.swapaxes(-1, -2)))
    elif mode == "complex_conjugate":
        d = _maxabs(Vp.conj() - Vm)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return d, max(_maxabs(Vp), _maxabs(Vm))


def conjugate_by_symmetry(Q_minus, H_plus, H_minus, mode, window=None, rtol=SYMMETRY_RTOL):
    """Reverse intertwiner from a symmetry of the Hamiltonian pair."""
    defect, scale = symmetry_defect(H_plus, H_minus, mode, window)
    tol = rtol * max(1.0, scale)
    if defect > tol:
        raise SymmetryViolated(mode, defect, tol)
    return SymmetryConjugate(Q_minus, mode)


class Supercharge:
    """2x2 block operator with a single off-diagonal block; acts on pairs of functions."""

    def __init__(self, block, position):
        self.block, self.position = block, position  # "upper": (0, Q+; 0, 0)

    def __call__(self, pair):
        top, bottom = pair
        n = self.block.n
        if self.position == "upper":
            return (self.block.image(bottom) if not isinstance(bottom, ZeroFunction) else ZeroFunction(n),
                    ZeroFunction(n))
        return (ZeroFunction(n),
                self.block.image(top) if not isinstance(top, ZeroFunction) else ZeroFunction(n))


@dataclass
class AlgebraReport:
    plus_product: ResidualReport            # Q+ Q- = P(H+)
    minus_product: ResidualReport | None    # Q- Q+ = P(H-), only when asserted
    nilpotency: float                       # Q^2 = Qbar^2 = 0
    commutator_minus: ResidualReport        # Q- H+ = H- Q-
    commutator_plus: ResidualReport         # H+ Q+ = Q+ H-

    @property
    def passed(self) -> bool:
        checks = [self.plus_product, self.commutator_minus, self.commutator_plus]
        if self.minus_product is not None:
            checks.append(self.minus_product)
        return all(c.passed for c in checks) and self.nilpotency == 0.0

    def as_dict(self):
        return {
            "anticommutator_plus": self.plus_product.as_dict(),
            "anticommutator_minus": None if self.minus_product is None else self.minus_product.as_dict(),
            "nilpotency": self.nilpotency,
            "commutator_minus": self.commutator_minus.as_dict(),
            "commutator_plus": self.commutator_plus.as_dict(),
            "passed": self.passed,
        }


def _product_report(outer, inner, P, H, tests, xs, tol):
    worst = scale = 0.0
    for f in tests:
        a = outer.image(inner.image(f)).jet(xs, 0)[0]
        b = P.apply(H, f).jet(xs, 0)[0]
        worst = max(worst, _maxabs(a - b))
        scale = max(scale, _maxabs(a), _maxabs(b))
    return ResidualReport(worst, scale, tol)


def verify_susy_algebra(Q_plus, Q_minus, H_plus, H_minus, P: SusyPolynomial, tests=None, grid=None,
                        tol=1e-8, no_lower_order=False) -> AlgebraReport:
    xs = _grid(grid)
    tests = tests or default_test_functions(Q_minus.n)
    plus = _product_report(Q_plus, Q_minus, P, H_plus, tests, xs, tol)
    minus = _product_report(Q_minus, Q_plus, P, H_minus, tests, xs, tol) if no_lower_order else None
    Q, Qbar = Supercharge(Q_plus, "upper"), Supercharge(Q_minus, "lower")
    nil = 0.0
    for f in tests:
        for S in (Q, Qbar):
            for pair in ((f, f), (f, ZeroFunction(f.n))):
                top, bottom = S(S(pair))
                nil = max(nil, _maxabs(top.jet(xs, 0)), _maxabs(bottom.jet(xs, 0)))
    comm_minus = intertwining_residual(Q_minus, H_plus, H_minus, tests, xs, tol)
    comm_plus = intertwining_residual(Q_plus, H_minus, H_plus, tests, xs, tol)
    return AlgebraReport(plus, minus, nil, comm_minus, comm_plus)
