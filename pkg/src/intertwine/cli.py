"""Command-line front end: ``intertwine run SCENARIO [--out DIR] ...``.

Exit codes: 0 when every executed check passes, 1 when a check fails or a
module error is raised, 2 when the scenario does not validate.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .conjugate import ExtensionBasis, build_conjugate, conjugate_by_symmetry, verify_susy_algebra
from .construct import (
    Window, build_intertwiner, default_test_functions, final_potential, intertwining_residual,
    kernel_residual, wronskian_values,
)
from .errors import IntertwineError, SingularWronskian
from .minimize import minimizable_factors, minimize
from .reduce import classify_reducibility
from .scenario import ScenarioError, load_scenario
from .schrodinger import T_PLUS_CONVENTION, spectral_summary, verify_chain

log = logging.getLogger("intertwine")


def _c(z):
    z = complex(z)
    return [z.real, z.imag]


def sample_potential(H, window: Window, stream) -> int:
    """Write ``x, V[i][j].re, V[i][j].im, ..., flag`` rows; returns the number of flagged rows."""
    n = H.n
    xs = window.points()
    writer = csv.writer(stream, lineterminator="\n")
    header = ["x"] + [f"V[{i}][{j}].{p}" for i in range(n) for j in range(n) for p in ("re", "im")]
    writer.writerow(header + ["flag"])
    try:
        values = H.potential(xs)
        flags = ["ok"] * len(xs)
    except SingularWronskian:
        values = np.full((len(xs), n, n), np.nan, dtype=complex)
        flags = []
        for p, x in enumerate(xs):
            try:
                values[p] = H.potential(np.array([x]))[0]
                flags.append("ok")
            except SingularWronskian:
                flags.append("singular-wronskian")
    for x, V, flag in zip(xs, values, flags):
        row = [repr(float(x))]
        for v in V.ravel():
            row += ["", ""] if flag != "ok" else [repr(float(v.real)), repr(float(v.imag))]
        writer.writerow(row + [flag])
    return sum(f != "ok" for f in flags)


class Runner:
    """Executes scenario commands in order, sharing built objects between them."""

    def __init__(self, sc, out: Path | None):
        self.sc, self.out = sc, out
        self.tests = sc.tests or default_test_functions(sc.n)
        self.Q = self.H_minus = self.conj = None
        self.timing = {}

    # each command returns a dict with at least "passed"

    def _build(self):
        if self.Q is None:
            self.Q = build_intertwiner(self.sc.H, self.sc.chains, self.sc.leading, self.sc.window,
                                       self.sc.tolerances.wronskian)
        return self.Q

    def _h_minus(self):
        if self.H_minus is None:
            self.H_minus = final_potential(self.sc.H, self._build())
        return self.H_minus

    def cmd_verify_chains(self):
        xs = self.sc.window.points()
        reports = []
        for c in list(self.sc.chains) + list(self.sc.extension):
            r = verify_chain(self.sc.H, c, xs, self.sc.tolerances.chain)
            reports.append({"lambda": _c(c.lam), "length": len(c), "residuals": r.residuals,
                            "scale": r.scale, "passed": r.passed})
        return {"passed": all(r["passed"] for r in reports), "chains": reports,
                "tolerance": self.sc.tolerances.chain}

    def cmd_build(self):
        Q = self._build()
        xs = self.sc.window.points()
        W, thr = wronskian_values(Q.members, Q.n, Q.N, xs, self.sc.tolerances.wronskian)
        kern = kernel_residual(Q, Q.members, xs, self.sc.tolerances.residual)
        summary = spectral_summary(self.sc.chains)
        return {
            "passed": kern.passed, "N": Q.N, "n": Q.n,
            "leading": [[_c(v) for v in row] for row in Q.leading],
            "wronskian": {"min_abs": float(np.min(np.abs(W))),
                          "min_ratio_to_threshold": float(np.min(np.abs(W) / np.where(thr > 0, thr, 1)))},
            "kernel_residual": kern.as_dict(),
            "spectral_summary": [{"lambda": _c(e.lam), "block_orders": list(e.orders), "g": e.g,
                                  "kappa": e.kappa} for e in summary.entries],
        }

    def cmd_final_potential(self):
        Hm = self._h_minus()
        xs = self.sc.window.points()
        V = Hm.potential(xs)
        probe = [self.sc.window.xmin, 0.5 * (self.sc.window.xmin + self.sc.window.xmax), self.sc.window.xmax]
        Vp = Hm.potential(np.array(probe))
        return {"passed": bool(np.all(np.isfinite(V))), "max_abs": float(np.max(np.abs(V))),
                "samples": [{"x": x, "V": [[_c(v) for v in row] for row in M]} for x, M in zip(probe, Vp)]}

    def cmd_verify_intertwining(self):
        r = intertwining_residual(self._build(), self.sc.H, self._h_minus(), self.tests,
                                  self.sc.window.points(), self.sc.tolerances.residual)
        return {"passed": r.passed, **r.as_dict()}

    def cmd_minimize(self):
        cert = minimizable_factors(spectral_summary(self.sc.chains), self.sc.n)
        out = {"certificate": cert.as_dict()}
        if not cert.minimizable:
            return {"passed": True, "status": "non-minimizable", **out}
        res = minimize(self.sc.H, self.sc.chains, cert, self.sc.leading, self.sc.window, self.tests,
                       self.sc.tolerances.residual, Q=self._build())
        return {"passed": res.report.passed, "status": "minimized", "P_order": res.P.order,
                "composition_residual": res.report.as_dict(), **out}

    def _conjugate(self):
        if self.conj is None:
            self.conj = build_conjugate(self.sc.H, self._h_minus(), self.sc.chains,
                                        ExtensionBasis(self.sc.extension), self._build(), self.sc.window,
                                        self.tests, self.sc.tolerances.residual)
        return self.conj

    def cmd_conjugate(self):
        res = self._conjugate()
        out = {"passed": res.report.passed, "order": res.operator.order,
               "scale_factor": _c(res.scale_factor), "polynomial": res.polynomial.as_dict(),
               "degree_identity": res.operator.order + self._build().order == 2 * res.polynomial.degree,
               "product_residual": res.report.as_dict()}
        out["passed"] = out["passed"] and out["degree_identity"]
        if self.sc.symmetry:
            xs = self.sc.window.points()
            S = conjugate_by_symmetry(self._build(), self.sc.H, self._h_minus(), self.sc.symmetry,
                                      self.sc.window)
            a = [S.image(f).jet(xs, 0)[0] for f in self.tests]
            b = [res.operator.image(f).jet(xs, 0)[0] for f in self.tests]
            av, bv = np.concatenate([v.ravel() for v in a]), np.concatenate([v.ravel() for v in b])
            c = np.vdot(av, bv) / np.vdot(av, av)
            diff = float(np.max(np.abs(c * av - bv)))
            tol = self.sc.tolerances.symmetry
            out["symmetry"] = {"mode": self.sc.symmetry, "scalar": _c(c), "max_difference": diff,
                               "tolerance": tol, "passed": diff <= tol}
            out["passed"] = out["passed"] and diff <= tol
        return out

    def cmd_susy(self):
        res = self._conjugate()
        rep = verify_susy_algebra(res.operator, self._build(), self.sc.H, self._h_minus(), res.polynomial,
                                  self.tests, self.sc.window.points(), self.sc.tolerances.residual,
                                  "no-lower-order-intertwiner" in self.sc.assertions)
        return {"passed": rep.passed, **rep.as_dict()}

    def cmd_reduce(self):
        v = classify_reducibility(self.sc.H, self.sc.chains, self.sc.n, None, self.sc.window,
                                  self.sc.probes, self.sc.seed, self.sc.leading, self.tests,
                                  self.sc.tolerances.residual)
        return {"passed": True, **v.as_dict()}

    def cmd_sample_potential(self):
        buf = io.StringIO()
        flagged = sample_potential(self._h_minus(), self.sc.window, buf)
        out = {"passed": True, "rows": self.sc.window.count, "flagged_rows": flagged}
        if self.out is not None:
            (self.out / "potential.csv").write_text(buf.getvalue())
            out["file"] = "potential.csv"
        return out

    def run(self):
        results = []
        failed_build = False
        for name in self.sc.commands:
            entry = {"command": name}
            if failed_build and name != "verify-chains":
                entry.update(status="skipped", passed=False, reason="build failed")
                results.append(entry)
                continue
            t0 = time.perf_counter()
            try:
                entry.update(getattr(self, "cmd_" + name.replace("-", "_"))())
                entry["status"] = "pass" if entry["passed"] else "fail"
            except IntertwineError as exc:
                entry.update(status="error", passed=False, error=exc.code, message=str(exc))
                if name == "build" or self.Q is None:
                    failed_build = True
            self.timing[name] = time.perf_counter() - t0
            log.info("%s: %s", name, entry["status"])
            results.append(entry)
        return results


def run(scenario_path, out_dir=None, seed=None, window=None, tol=None) -> int:
    try:
        sc = load_scenario(scenario_path)
    except ScenarioError as exc:
        print(json.dumps({"status": "invalid", "error": exc.code, "message": str(exc)}), file=sys.stderr)
        return 2
    if seed is not None:
        sc.seed = seed
    if window is not None:
        sc.window = window
    if tol is not None:
        sc.tolerances = dataclasses.replace(sc.tolerances, residual=tol)
    out = Path(out_dir) if out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    runner = Runner(sc, out)
    results = runner.run()
    passed = all(r["passed"] for r in results)
    report = {
        "scenario": sc.name,
        "version": __version__,
        "conventions": {
            "t_plus": T_PLUS_CONVENTION,
            "window": sc.window.as_dict(),
            "wronskian_threshold": f"|W| > {sc.tolerances.wronskian:g} * prod(row norms) at every window point",
            "residual_rule": f"residual <= {sc.tolerances.residual:g} * max(1, scale)",
            "nonvanishing": "certified on the window only",
            "seed": sc.seed,
        },
        "tolerances": dataclasses.asdict(sc.tolerances),
        "commands": results,
        "passed": passed,
    }
    text = json.dumps(report, indent=2, sort_keys=True, default=_c)
    if out is not None:
        (out / "report.json").write_text(text + "\n")
        (out / "timing.json").write_text(json.dumps(runner.timing, indent=2, sort_keys=True) + "\n")
    else:
        print(text)
    return 0 if passed else 1


def _window(text):
    try:
        a, b, m = text.split(",")
        return Window(float(a), float(b), int(m))
    except ValueError:
        raise argparse.ArgumentTypeError("expected a,b,m") from None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="intertwine", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("scenario")
    p.add_argument("--out", default=None, help="directory for report.json, timing.json, potential.csv")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--window", type=_window, default=None, metavar="a,b,m")
    p.add_argument("--tol", type=float, default=None, help="residual tolerance")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    return run(args.scenario, args.out, args.seed, args.window, args.tol)


if __name__ == "__main__":
    sys.exit(main())
