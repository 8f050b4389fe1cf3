"""Matrix Schrodinger Hamiltonians, vector-functions and association chains.

Every function-like object here exposes ``n`` and ``jet(x, order)``, returning
the stacked derivatives ``f, f', ..., f^(order)`` at the points ``x`` as a
complex array of shape ``(order + 1, len(x), n)``. Exact expression trees,
operator images and linear combinations all share this protocol, so chains
for transformed Hamiltonians are handled exactly like chains built from text.

Chain convention: ``H Phi_i = lam Phi_i + Phi_{i-1}``, which makes the block
of ``T+`` lower-bidiagonal (``lam`` on the diagonal, 1 on the first
subdiagonal).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import exprcore as ec
from .errors import DimensionMismatch, EmptyChainSet

T_PLUS_CONVENTION = "lower-bidiagonal: H Phi_i = lam Phi_i + Phi_(i-1)"
LAMBDA_ATOL = 1e-12
_CACHE_SIZE = 16


def grid_points(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


class JetCache:
    """Small memo for ``(grid, order) -> array``; objects using it are immutable."""

    def __init__(self):
        self._store = {}

    def get(self, xs, order, compute):
        key = (xs.tobytes(), order)
        hit = self._store.get(key)
        if hit is None:
            for (kx, ko), arr in self._store.items():
                if kx == key[0] and ko > order:
                    return arr[:order + 1]
            hit = compute()
            hit.setflags(write=False)
            if len(self._store) >= _CACHE_SIZE:
                self._store.pop(next(iter(self._store)))
            self._store[key] = hit
        return hit


class VectorFunction:
    """An n-component column of expression trees."""

    def __init__(self, components):
        comps = []
        for c in components:
            comps.append(ec.parse(c) if isinstance(c, str) else ec._coerce(c))
        if not comps:
            raise DimensionMismatch("a vector-function needs at least one component")
        self.components = tuple(comps)
        self._derivs = [self.components]
        self._cache = JetCache()

    @property
    def n(self) -> int:
        return len(self.components)

    def derivative(self, k: int) -> tuple:
        while len(self._derivs) <= k:
            self._derivs.append(tuple(ec.differentiate(c) for c in self._derivs[-1]))
        return self._derivs[k]

    def jet(self, x, order: int) -> np.ndarray:
        xs = grid_points(x)
        return self._cache.get(xs, order, lambda: self._jet(xs, order))

    def _jet(self, xs, order):
        out = np.empty((order + 1, len(xs), self.n), dtype=complex)
        for k in range(order + 1):
            for m, c in enumerate(self.derivative(k)):
                out[k, :, m] = ec.evaluate(c, xs)
        return out

    def __call__(self, x):
        return self.jet(x, 0)[0]

    def scaled(self, c) -> "VectorFunction":
        return VectorFunction([ec.mul(ec.const(c), e) for e in self.components])

    def __repr__(self):
        return "VectorFunction(" + ", ".join(ec.to_text(c) for c in self.components) + ")"


class LinearCombination:
    """``sum_i c_i f_i`` of function-like objects with equal ``n``."""

    def __init__(self, terms):
        self.terms = tuple((complex(c), f) for c, f in terms if c != 0)
        if not self.terms:
            raise ValueError("empty linear combination")
        ns = {f.n for _, f in self.terms}
        if len(ns) != 1:
            raise DimensionMismatch(f"mixed component counts {sorted(ns)}")
        self.n = ns.pop()

    def jet(self, x, order):
        return sum(c * f.jet(x, order) for c, f in self.terms)

    def __call__(self, x):
        return self.jet(x, 0)[0]


class ZeroFunction:
    def __init__(self, n):
        self.n = n

    def jet(self, x, order):
        return np.zeros((order + 1, len(grid_points(x)), self.n), dtype=complex)


class SchrodingerHamiltonian:
    """``H = -I d^2/dx^2 + V(x)``; subclasses supply ``potential_jet``."""

    n: int

    def potential_jet(self, x, order: int) -> np.ndarray:
        """Derivatives of V, shape ``(order + 1, len(x), n, n)``."""
        raise NotImplementedError

    def potential(self, x) -> np.ndarray:
        return self.potential_jet(grid_points(x), 0)[0]

    def apply_jet(self, fjet: np.ndarray, order: int, x) -> np.ndarray:
        """Derivatives ``0..order`` of ``H f`` from the jet of ``f``."""
        if fjet.shape[0] < order + 3:
            raise ValueError("jet too short for H")
        if fjet.shape[-1] != self.n:
            raise DimensionMismatch(f"function has {fjet.shape[-1]} components, H has order {self.n}")
        V = self.potential_jet(x, order)
        out = -fjet[2:order + 3].copy()
        for k in range(order + 1):
            for i in range(k + 1):
                out[k] += comb(k, i) * np.einsum("pab,pb->pa", V[i], fjet[k - i])
        return out

    def image(self, f, shift=0.0) -> "HamiltonianImage":
        """The function-like ``(H - shift) f``."""
        return HamiltonianImage(self, f, shift)


class MatrixHamiltonian(SchrodingerHamiltonian):
    """Hamiltonian whose potential entries are expression trees."""

    def __init__(self, V):
        rows = [[ec.parse(v) if isinstance(v, str) else ec._coerce(v) for v in row] for row in V]
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise DimensionMismatch("potential must be a non-empty square grid")
        self.n = n
        self.V = tuple(tuple(r) for r in rows)
        self._derivs = [self.V]
        self._cache = JetCache()

    @classmethod
    def free(cls, n: int) -> "MatrixHamiltonian":
        return cls([[0] * n for _ in range(n)])

    def _derivative(self, k):
        while len(self._derivs) <= k:
            self._derivs.append(tuple(tuple(ec.differentiate(v) for v in row) for row in self._derivs[-1]))
        return self._derivs[k]

    def potential_jet(self, x, order):
        xs = grid_points(x)
        return self._cache.get(xs, order, lambda: self._potential_jet(xs, order))

    def _potential_jet(self, xs, order):
        out = np.empty((order + 1, len(xs), self.n, self.n), dtype=complex)
        for k in range(order + 1):
            for a, row in enumerate(self._derivative(k)):
                for b, v in enumerate(row):
                    out[k, :, a, b] = ec.evaluate(v, xs)
        return out


class HamiltonianImage:
    def __init__(self, H, f, shift=0.0):
        if f.n != H.n:
            raise DimensionMismatch(f"function has {f.n} components, H has order {H.n}")
        self.H, self.f, self.shift, self.n = H, f, complex(shift), H.n

    def jet(self, x, order):
        xs = grid_points(x)
        fj = self.f.jet(xs, order + 2)
        out = self.H.apply_jet(fj, order, xs)
        if self.shift:
            out -= self.shift * fj[:order + 1]
        return out


class PolynomialImage:
    """``sign * prod_l (H - lam_l)^k_l f`` for ``roots = [(lam_l, k_l), ...]``."""

    def __init__(self, H, roots, f, sign=1):
        if f.n != H.n:
            raise DimensionMismatch(f"function has {f.n} components, H has order {H.n}")
        self.H, self.f, self.n = H, f, H.n
        self.roots = tuple((complex(l), int(k)) for l, k in roots)
        self.sign = sign
        self.degree = sum(k for _, k in self.roots)

    def jet(self, x, order):
        xs = grid_points(x)
        g = self.f.jet(xs, order + 2 * self.degree)
        for lam, k in self.roots:
            for _ in range(k):
                top = g.shape[0] - 3
                g = self.H.apply_jet(g, top, xs) - lam * g[:top + 1]
        return self.sign * g


def apply_hamiltonian(H: MatrixHamiltonian, phi: VectorFunction) -> VectorFunction:
    """Exact ``-phi'' + V phi`` as a new :class:`VectorFunction`."""
    if phi.n != H.n:
        raise DimensionMismatch(f"function has {phi.n} components, H has order {H.n}")
    second = phi.derivative(2)
    comps = []
    for a in range(H.n):
        terms = [ec.neg(second[a])]
        terms += [ec.mul(H.V[a][b], phi.components[b]) for b in range(H.n)]
        comps.append(ec.add(*terms))
    return VectorFunction(comps)


@dataclass(frozen=True)
class AssociationChain:
    """Eigenfunction followed by associated functions of increasing order."""

    lam: complex
    members: tuple

    def __init__(self, lam, members):
        members = tuple(members)
        if not members:
            raise ValueError("a chain needs at least one member")
        if len({m.n for m in members}) != 1:
            raise DimensionMismatch("chain members have different component counts")
        object.__setattr__(self, "lam", complex(lam))
        object.__setattr__(self, "members", members)

    @property
    def n(self) -> int:
        return self.members[0].n

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class ChainSet:
    chains: tuple

    def __init__(self, chains):
        chains = tuple(chains)
        if len({c.n for c in chains}) > 1:
            raise DimensionMismatch("chains have different component counts")
        object.__setattr__(self, "chains", chains)

    @property
    def members(self) -> list:
        return [m for c in self.chains for m in c.members]

    @property
    def d(self) -> int:
        return sum(len(c) for c in self.chains)

    @property
    def n(self):
        return self.chains[0].n if self.chains else None

    def __iter__(self):
        return iter(self.chains)

    def __len__(self):
        return len(self.chains)


def as_chainset(cs) -> ChainSet:
    return cs if isinstance(cs, ChainSet) else ChainSet(cs)


@dataclass
class ChainReport:
    lam: complex
    residuals: list
    scale: float
    tolerance: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = all(r <= self.tolerance * max(1.0, self.scale) for r in self.residuals)

    @property
    def max_residual(self) -> float:
        return max(self.residuals)


def verify_chain(H: SchrodingerHamiltonian, chain: AssociationChain, grid, tol=1e-10) -> ChainReport:
    """Residuals of ``(H - lam) Phi_i - Phi_(i-1)`` on the grid, one per link.

    A link passes when its residual is at most ``tol * max(1, scale)`` where
    ``scale`` is the largest magnitude of the terms involved.
    """
    xs = grid_points(grid)
    if chain.n != H.n:
        raise DimensionMismatch(f"chain has {chain.n} components, H has order {H.n}")
    residuals, scale = [], 0.0
    prev = np.zeros((len(xs), H.n), dtype=complex)
    for member in chain.members:
        fj = member.jet(xs, 2)
        hf = H.apply_jet(fj, 0, xs)[0]
        lhs = hf - chain.lam * fj[0]
        residuals.append(float(np.max(np.abs(lhs - prev))))
        scale = max(scale, float(np.max(np.abs(fj[2]))), float(np.max(np.abs(hf))),
                    float(np.max(np.abs(chain.lam * fj[0]))))
        prev = fj[0]
    return ChainReport(chain.lam, residuals, scale, tol)


@dataclass(frozen=True)
class SpectralEntry:
    lam: complex
    orders: tuple  # Jordan block orders, descending

    @property
    def g(self) -> int:
        return len(self.orders)

    @property
    def kappa(self) -> int:
        return max(self.orders)

    @property
    def size(self) -> int:
        return sum(self.orders)


@dataclass(frozen=True)
class SpectralSummary:
    entries: tuple
    n: int

    @property
    def d(self) -> int:
        return sum(e.size for e in self.entries)

    @property
    def N(self) -> int:
        if self.d % self.n:
            raise ValueError(f"{self.d} kernel vectors is not a multiple of n={self.n}")
        return self.d // self.n

    def entry(self, lam) -> SpectralEntry:
        for e in self.entries:
            if same_lambda(e.lam, lam):
                return e
        raise KeyError(lam)

    @classmethod
    def from_orders(cls, orders: dict, n: int) -> "SpectralSummary":
        return cls(tuple(SpectralEntry(complex(l), tuple(sorted(o, reverse=True)))
                         for l, o in orders.items()), n)


def same_lambda(a, b) -> bool:
    return abs(complex(a) - complex(b)) <= LAMBDA_ATOL * (1 + abs(complex(a)))


def group_by_lambda(chains) -> list:
    """``[(lam, [chains...]), ...]`` in first-seen order."""
    groups = []
    for c in chains:
        for lam, members in groups:
            if same_lambda(lam, c.lam):
                members.append(c)
                break
        else:
            groups.append((c.lam, [c]))
    return groups


def spectral_summary(cs) -> SpectralSummary:
    cs = as_chainset(cs)
    if not cs.chains:
        raise EmptyChainSet("no chains given")
    n = cs.n
    entries = []
    for lam, chains in group_by_lambda(cs.chains):
        orders = tuple(sorted((len(c) for c in chains), reverse=True))
        if len(orders) > 2 * n:
            warnings.warn(f"{len(orders)} chains at lambda={lam} exceed 2n={2 * n}; "
                          "they cannot all be independent solutions", stacklevel=2)
        entries.append(SpectralEntry(lam, orders))
    return SpectralSummary(tuple(entries), n)


def t_plus_matrix(cs) -> np.ndarray:
    cs = as_chainset(cs)
    T = np.zeros((cs.d, cs.d), dtype=complex)
    start = 0
    for c in cs.chains:
        for i in range(len(c)):
            T[start + i, start + i] = c.lam
            if i:
                T[start + i, start + i - 1] = 1
        start += len(c)
    return T


def t_plus_residual(H: SchrodingerHamiltonian, cs, grid) -> float:
    """``max |H Phi_i - sum_j T+_ij Phi_j|`` over the grid."""
    cs = as_chainset(cs)
    xs = grid_points(grid)
    T = t_plus_matrix(cs)
    jets = [m.jet(xs, 2) for m in cs.members]
    values = np.stack([j[0] for j in jets])
    worst = 0.0
    for i, fj in enumerate(jets):
        hf = H.apply_jet(fj, 0, xs)[0]
        rhs = np.tensordot(T[i], values, axes=1)
        worst = max(worst, float(np.max(np.abs(hf - rhs))))
    return worst
