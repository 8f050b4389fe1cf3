"""Minimizability of an intertwiner and removal of its scalar polynomial factor.

An operator of order N whose chain structure has exactly 2n Jordan blocks at
some eigenvalues factors as ``P_M prod_l (lam_l - H+)^k_l`` with ``k_l`` the
smallest block order at ``lam_l`` and ``M = N - 2 sum k_l``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .construct import (
    ResidualReport, _grid, _maxabs, build_intertwiner, default_test_functions,
)
from .errors import FactorInconsistent
from .schrodinger import AssociationChain, ChainSet, PolynomialImage, SpectralSummary, as_chainset

ZERO_RTOL = 1e-10


@dataclass(frozen=True)
class MinimizationCertificate:
    factors: tuple  # ((lam, k), ...)
    N: int

    @property
    def degree(self) -> int:
        return sum(k for _, k in self.factors)

    @property
    def M(self) -> int:
        return self.N - 2 * self.degree

    @property
    def minimizable(self) -> bool:
        return bool(self.factors)

    @property
    def polynomial_roots(self) -> list:
        """Root multiset of the monic polynomial ``prod (lam - lam_l)^k_l``."""
        return [lam for lam, k in self.factors for _ in range(k)]

    def as_dict(self):
        return {"factors": [{"lambda": [l.real, l.imag], "k": k} for l, k in self.factors],
                "N": self.N, "M": self.M, "minimizable": self.minimizable}


def minimizable_factors(summary: SpectralSummary, n: int | None = None) -> MinimizationCertificate:
    """Eigenvalues carrying exactly ``2n`` Jordan blocks, each with its smallest block order."""
    n = summary.n if n is None else n
    factors = tuple((e.lam, min(e.orders)) for e in summary.entries if e.g == 2 * n)
    return MinimizationCertificate(factors, summary.N)


@dataclass
class MinimizationResult:
    P: object
    report: ResidualReport
    reduced: ChainSet
    certificate: MinimizationCertificate

    def __iter__(self):
        return iter((self.P, self.report))


def reduce_chains(H, cs, factors, grid=None, zero_rtol=ZERO_RTOL) -> ChainSet:
    """Apply ``prod (lam_l - H)^k_l`` to every member and regroup the survivors.

    The images of one chain that survive must be a suffix of it; they form a
    chain at the same spectral value.
    """
    xs = _grid(grid)
    sign = (-1) ** sum(k for _, k in factors)
    out = []
    for chain in as_chainset(cs):
        images, alive = [], []
        for member in chain.members:
            img = PolynomialImage(H, factors, member, sign)
            scale = _maxabs(member.jet(xs, 2 * img.degree))
            scale *= max([1.0] + [abs(l) for l, _ in factors]) ** img.degree
            images.append(img)
            alive.append(_maxabs(img.jet(xs, 0)) > zero_rtol * max(scale, 1e-300))
        if any(alive):
            cut = alive.index(True)
            if not all(alive[cut:]):
                raise FactorInconsistent(f"images of the chain at lambda={chain.lam} vanish out of order")
            out.append(AssociationChain(chain.lam, images[cut:]))
    return ChainSet(out)


def minimize(H, cs, cert: MinimizationCertificate, leading=None, window=None, tests=None,
             tol=1e-8, Q=None, zero_rtol=ZERO_RTOL) -> MinimizationResult:
    """Build the non-minimizable factor ``P`` and check ``Q f = P prod(lam_l - H) f``."""
    if not cert.factors:
        raise FactorInconsistent("operator is not minimizable: no factors to remove")
    cs = as_chainset(cs)
    n = cs.n
    xs = _grid(window)
    reduced = reduce_chains(H, cs, cert.factors, xs, zero_rtol)
    if reduced.d != n * cert.M:
        raise FactorInconsistent(f"{reduced.d} surviving members, expected n*M={n * cert.M}")
    Q = Q or build_intertwiner(H, cs, leading, window)
    P = build_intertwiner(H, reduced, Q.leading, window, n=n)
    sign = (-1) ** cert.degree
    tests = tests or default_test_functions(n)
    worst = scale = 0.0
    for f in tests:
        lhs = Q.image(f).jet(xs, 0)[0]
        rhs = P.image(PolynomialImage(H, cert.factors, f, sign)).jet(xs, 0)[0]
        worst = max(worst, _maxabs(lhs - rhs))
        scale = max(scale, _maxabs(lhs), _maxabs(rhs))
    return MinimizationResult(P, ResidualReport(worst, scale, tol), reduced, cert)

