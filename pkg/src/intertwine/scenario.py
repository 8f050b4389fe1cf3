"""Scenario files: INI-style ``key = value`` sections.

Example::

    [scenario]
    name = one-soliton
    n = 1
    commands = verify-chains, build, final-potential, verify-intertwining
    assertions = no-lower-order-intertwiner

    [potential]
    V[0][0] = 0

    [chain:a]
    lambda = -1
    0 = cosh(x)

Vector components are comma separated. Member keys are the associated-function
order (0, 1, 2, ...). ``[extension:*]`` sections have the same layout as
chains; ``[tests]`` lists test vector-functions; ``[leading]`` sets ``X[i][j]``
entries of the leading coefficient (default identity).
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import exprcore as ec
from .construct import Window
from .schrodinger import AssociationChain, ChainSet, MatrixHamiltonian, VectorFunction

COMMANDS = (
    "verify-chains", "build", "final-potential", "verify-intertwining", "minimize",
    "conjugate", "susy", "reduce", "sample-potential",
)
ASSERTIONS = ("no-lower-order-intertwiner",)
SYMMETRY_MODES = ("hermitian", "transpose", "complex_conjugate")

_ENTRY = re.compile(r"^[VX]\[(\d+)\]\[(\d+)\]$")


class ScenarioError(ValueError):
    code = "ScenarioError"


@dataclass
class Tolerances:
    residual: float = 1e-8
    wronskian: float = 1e-10
    chain: float = 1e-10
    symmetry: float = 1e-7


@dataclass
class Scenario:
    name: str
    n: int
    H: MatrixHamiltonian
    chains: ChainSet
    commands: list
    N: int | None = None
    leading: np.ndarray | None = None
    extension: list = field(default_factory=list)
    tests: list = field(default_factory=list)
    window: Window = field(default_factory=Window)
    tolerances: Tolerances = field(default_factory=Tolerances)
    assertions: set = field(default_factory=set)
    symmetry: str | None = None
    seed: int = 0
    probes: int = 32
    source: dict = field(default_factory=dict)


def _expr(text, where):
    try:
        return ec.parse(text)
    except ec.ExprSyntaxError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def _complex(text, where) -> complex:
    e = _expr(text, where)
    if not isinstance(e, ec.Const):
        raise ScenarioError(f"{where}: {text!r} is not a constant")
    return e.value


def _vector(text, n, where) -> VectorFunction:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != n:
        raise ScenarioError(f"{where}: expected {n} components, got {len(parts)}")
    return VectorFunction([_expr(p, f"{where}[{i}]") for i, p in enumerate(parts)])


def _matrix_entries(section, n, where, default):
    grid = [[default(i, j) for j in range(n)] for i in range(n)]
    for key, value in section.items():
        m = _ENTRY.match(key)
        if not m:
            raise ScenarioError(f"{where}: bad entry key {key!r} (expected V[i][j] / X[i][j])")
        i, j = int(m.group(1)), int(m.group(2))
        if i >= n or j >= n:
            raise ScenarioError(f"{where}: entry {key} outside {n}x{n}")
        grid[i][j] = value
    return grid


def _chain(section, n, where) -> AssociationChain:
    if "lambda" not in section:
        raise ScenarioError(f"{where}: missing 'lambda'")
    lam = _complex(section["lambda"], f"{where}.lambda")
    keys = sorted((k for k in section if k != "lambda"), key=lambda k: (not k.isdigit(), k))
    if any(not k.isdigit() for k in keys):
        raise ScenarioError(f"{where}: member keys must be 0, 1, 2, ...")
    orders = [int(k) for k in keys]
    if orders != list(range(len(orders))) or not orders:
        raise ScenarioError(f"{where}: members must be numbered 0..k-1 without gaps")
    return AssociationChain(lam, [_vector(section[k], n, f"{where}.{k}") for k in keys])


def _int(section, key, where, default=None):
    if key not in section:
        if default is None:
            raise ScenarioError(f"{where}: missing {key!r}")
        return default
    try:
        return int(section[key])
    except ValueError:
        raise ScenarioError(f"{where}.{key}: not an integer: {section[key]!r}") from None


def _float(section, key, where, default):
    try:
        return float(section.get(key, default))
    except ValueError:
        raise ScenarioError(f"{where}.{key}: not a number: {section[key]!r}") from None


def _list(text):
    return [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"malformed scenario file: {exc}") from None
    if "scenario" not in cp:
        raise ScenarioError("missing [scenario] section")
    head = cp["scenario"]
    n = _int(head, "n", "scenario")
    if n < 1:
        raise ScenarioError("scenario.n must be positive")
    commands = _list(head.get("commands", ",".join(COMMANDS[:4])))
    for c in commands:
        if c not in COMMANDS:
            raise ScenarioError(f"unknown command {c!r}; valid: {', '.join(COMMANDS)}")
    assertions = set(_list(head.get("assertions", "")))
    for a in assertions:
        if a not in ASSERTIONS:
            raise ScenarioError(f"unknown assertion {a!r}")
    symmetry = head.get("symmetry")
    if symmetry is not None and symmetry not in SYMMETRY_MODES:
        raise ScenarioError(f"unknown symmetry mode {symmetry!r}")

    pot = cp["potential"] if "potential" in cp else {}
    V = _matrix_entries(pot, n, "potential", lambda i, j: "0")
    H = MatrixHamiltonian([[_expr(v, f"potential.V[{i}][{j}]") for j, v in enumerate(row)]
                           for i, row in enumerate(V)])

    leading = None
    if "leading" in cp:
        X = _matrix_entries(cp["leading"], n, "leading", lambda i, j: "0")
        leading = np.array([[_complex(v, f"leading.X[{i}][{j}]") for j, v in enumerate(row)]
                            for i, row in enumerate(X)])

    chains = [_chain(cp[s], n, s) for s in cp.sections() if s.startswith("chain:")]
    extension = [_chain(cp[s], n, s) for s in cp.sections() if s.startswith("extension:")]
    cs = ChainSet(chains)
    N = None
    if chains:
        if cs.d % n:
            raise ScenarioError(f"{cs.d} chain members is not a multiple of n={n}")
        N = cs.d // n
    if "N" in head and N is not None and _int(head, "N", "scenario") != N:
        raise ScenarioError(f"scenario.N={head['N']} but chains give N={N}")
    if not chains and set(commands) - {"verify-chains"}:
        raise ScenarioError("no [chain:*] sections")
    if {"conjugate", "susy"} & set(commands) and not extension:
        raise ScenarioError("conjugate/susy commands need [extension:*] sections")

    tests = [_vector(v, n, f"tests.{k}") for k, v in cp["tests"].items()] if "tests" in cp else []

    win = cp["window"] if "window" in cp else {}
    window = Window(_float(win, "xmin", "window", -5.0), _float(win, "xmax", "window", 5.0),
                    _int(win, "points", "window", 201))
    if window.count < 2 or window.xmax <= window.xmin:
        raise ScenarioError("window must have xmax > xmin and at least 2 points")

    tol = cp["tolerances"] if "tolerances" in cp else {}
    d = Tolerances()
    tolerances = Tolerances(*(_float(tol, k, "tolerances", getattr(d, k))
                              for k in ("residual", "wronskian", "chain", "symmetry")))

    return Scenario(
        name=head.get("name", name), n=n, H=H, chains=cs, commands=commands, N=N, leading=leading,
        extension=extension, tests=tests, window=window, tolerances=tolerances,
        assertions=assertions, symmetry=symmetry, seed=_int(head, "seed", "scenario", 0),
        probes=_int(head, "probes", "scenario", 32),
        source={s: dict(cp[s]) for s in cp.sections()},
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from None
    return parse_scenario(text, path.stem)
