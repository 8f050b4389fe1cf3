"""Reducibility classification of an intertwiner and explicit two-step factorization.

Candidate sub-kernels are H+-invariant: prefixes of chains. The search is
complete when every spectral value carries a single chain; otherwise the
prefixes of randomly re-mixed chain families are probed as well.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .construct import (
    ResidualReport, Window, _grid, _maxabs, build_intertwiner, default_test_functions,
    final_potential, wronskian_values, WRONSKIAN_RTOL,
)
from .errors import CompositionDefect, IntertwineError
from .schrodinger import AssociationChain, ChainSet, LinearCombination, as_chainset, group_by_lambda

NONVANISHING = "nonvanishing-on-window"
VANISHES = "vanishes-somewhere"
IDENTICALLY_ZERO = "identically-zero"

REDUCIBLE = "Reducible"
IRREDUCIBLE = "Irreducible"
ABSOLUTELY_IRREDUCIBLE = "AbsolutelyIrreducible"

DEFAULT_PROBES = 32
RANDOM_SAMPLES = 64
RANDOM_INTERVAL = (-10.0, 10.0)


@dataclass(frozen=True)
class SubkernelCandidate:
    prefix: tuple          # selected prefix length per chain
    chains: tuple          # chains the prefixes refer to (mixed for probes)
    probe: int | None = None

    @property
    def selected(self) -> ChainSet:
        return ChainSet([AssociationChain(c.lam, c.members[:p]) for c, p in zip(self.chains, self.prefix) if p])

    @property
    def remaining(self) -> list:
        return [(c.lam, c.members[p:]) for c, p in zip(self.chains, self.prefix) if p < len(c)]

    @property
    def size(self) -> int:
        return sum(self.prefix)

    def describe(self):
        return {"prefix": list(self.prefix), "probe": self.probe}


def _prefix_assignments(lengths, total):
    for combo in itertools.product(*(range(k + 1) for k in lengths)):
        if sum(combo) == total:
            yield combo


def _mix_family(family, rng):
    coeffs = {}
    for t, ct in enumerate(family):
        for s, cs_ in enumerate(family):
            if s != t and len(cs_) <= len(ct):
                coeffs[t, s] = complex(rng.normal(), rng.normal())
    mixed = []
    for t, ct in enumerate(family):
        Lt = len(ct)
        members = []
        for i in range(Lt):
            terms = [(1.0, ct.members[i])]
            for (tt, s), a in coeffs.items():
                if tt != t:
                    continue
                j = i - (Lt - len(family[s]))
                if j >= 0:
                    terms.append((a, family[s].members[j]))
            members.append(LinearCombination(terms))
        mixed.append(AssociationChain(ct.lam, members))
    return mixed


def mix_chains(chains, rng) -> list:
    """Random change of basis within every same-lambda family (spans are preserved).

    Chain t gains random multiples of every other chain of its family that is
    no longer than it, aligned at the top, so ``(H - lam)`` still shifts each
    new chain down by one.
    """
    out = []
    for lam, family in group_by_lambda(chains):
        out.extend(family if len(family) == 1 else _mix_family(family, rng))
    return out


def single_chain_regime(cs) -> bool:
    return all(len(g) == 1 for _, g in group_by_lambda(as_chainset(cs).chains))


def enumerate_subkernels(cs, n: int, M: int, probes: int = DEFAULT_PROBES, rng=None) -> list:
    """All chain-prefix selections of ``n*M`` members, plus mixed-basis probes."""
    cs = as_chainset(cs)
    N = cs.d // n
    if not 1 <= M < N:
        raise ValueError(f"need 1 <= M < N={N}, got M={M}")
    lengths = [len(c) for c in cs.chains]
    out = [SubkernelCandidate(p, cs.chains) for p in _prefix_assignments(lengths, n * M)]
    if not single_chain_regime(cs) and probes:
        rng = rng if rng is not None else np.random.default_rng(0)
        for r in range(probes):
            mixed = tuple(mix_chains(cs.chains, rng))
            lens = [len(c) for c in mixed]
            out.extend(SubkernelCandidate(p, mixed, r) for p in _prefix_assignments(lens, n * M))
    return out


def wronskian_status(candidate: SubkernelCandidate, n: int, M: int, window=None, rng=None,
                     rtol=WRONSKIAN_RTOL, samples=RANDOM_SAMPLES, interval=RANDOM_INTERVAL) -> str:
    xs = _grid(window)
    rng = rng if rng is not None else np.random.default_rng(0)
    extra = rng.uniform(*interval, size=samples)
    members = candidate.selected.members
    W, thr = wronskian_values(members, n, M, xs, rtol)
    above = np.abs(W) > thr
    if above.all():
        return NONVANISHING
    W2, thr2 = wronskian_values(members, n, M, extra, rtol)
    if not above.any() and not (np.abs(W2) > thr2).any():
        return IDENTICALLY_ZERO
    return VANISHES


@dataclass
class Factorization:
    P: object
    H_M: object
    K: object
    report: ResidualReport
    candidate: SubkernelCandidate


def factorize(H, cs, candidate: SubkernelCandidate, leading=None, window=None, tests=None,
              tol=1e-8, Q=None) -> Factorization:
    """``Q = K P`` with ``P`` built from the candidate and ``K`` from the ``P``-images of the rest."""
    cs = as_chainset(cs)
    n = cs.n
    xs = _grid(window)
    Q = Q or build_intertwiner(H, cs, leading, window)
    P = build_intertwiner(H, candidate.selected, None, window, n=n)
    H_M = final_potential(H, P)
    rest = ChainSet([AssociationChain(lam, [P.image(m) for m in members])
                     for lam, members in candidate.remaining])
    # P has identity leading coefficient, so K carries Q's
    K = build_intertwiner(H_M, rest, Q.leading, window, n=n)
    tests = tests or default_test_functions(n)
    worst = scale = 0.0
    for f in tests:
        a = Q.image(f).jet(xs, 0)[0]
        b = K.image(P.image(f)).jet(xs, 0)[0]
        worst = max(worst, _maxabs(a - b))
        scale = max(scale, _maxabs(a), _maxabs(b))
    report = ResidualReport(worst, scale, tol)
    if not report.passed:
        raise CompositionDefect(f"|Q f - K P f| = {worst:.3e} exceeds {report.bound:.3e}")
    return Factorization(P, H_M, K, report, candidate)


@dataclass
class ReducibilityVerdict:
    kind: str
    M: int | None = None
    factorization: Factorization | None = None
    evidence: list = field(default_factory=list)
    regime: str = "exact"
    window: Window | None = None

    @property
    def candidate(self):
        return self.factorization.candidate if self.factorization else None

    def as_dict(self):
        out = {"verdict": self.kind, "M": self.M, "regime": self.regime,
               "window": self.window.as_dict() if self.window else None,
               "evidence": self.evidence}
        if self.factorization is not None:
            out["factorization"] = {"candidate": self.factorization.candidate.describe(),
                                    "residual": self.factorization.report.as_dict()}
        return out


def classify_reducibility(H, cs, n=None, N=None, window=None, probes=DEFAULT_PROBES, seed=0,
                          leading=None, tests=None, tol=1e-8) -> ReducibilityVerdict:
    cs = as_chainset(cs)
    n = n or cs.n
    N = N or cs.d // n
    win = window if isinstance(window, Window) else (Window() if window is None else None)
    rng = np.random.default_rng(seed)
    regime = "exact" if single_chain_regime(cs) else "probabilistic"
    Q = build_intertwiner(H, cs, leading, window)
    evidence, statuses = [], []
    if N < 2:
        evidence.append({"note": "first-order operators admit no proper factorization"})
        return ReducibilityVerdict(IRREDUCIBLE, None, None, evidence, regime, win)
    for M in range(1, N):
        for cand in enumerate_subkernels(cs, n, M, probes, rng):
            status = wronskian_status(cand, n, M, window, rng)
            statuses.append(status)
            record = {"M": M, **cand.describe(), "status": status}
            evidence.append(record)
            if status != NONVANISHING:
                continue
            try:
                fact = factorize(H, cs, cand, leading, window, tests, tol, Q)
            except IntertwineError as exc:
                record["factorization_error"] = f"{exc.code}: {exc}"
                continue
            return ReducibilityVerdict(REDUCIBLE, M, fact, evidence, regime, win)
    if statuses and all(s == IDENTICALLY_ZERO for s in statuses):
        return ReducibilityVerdict(ABSOLUTELY_IRREDUCIBLE, None, None, evidence, regime, win)
    return ReducibilityVerdict(IRREDUCIBLE, None, None, evidence, regime, win)
