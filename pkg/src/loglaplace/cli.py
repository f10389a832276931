"""Command-line interface: ``loglaplace {coeffs,verify,sweep,builtin}``.

Exit status is 0 when every requested check passes, 1 when a check fails and
2 for unusable input (bad arguments, malformed model files, oracle
preconditions).
"""
from __future__ import annotations

import argparse
import sys

from . import io
from .cumulants import expand
from .model import Model
from .models import (LaplaceIntegrand, build_integrand, gaussian_model, log_evidence_terms,
                     polynomial_integrand)
from .oracles import remainder_sweep, run_oracle
from .quadratize import run_pipeline

DISCREPANCY_LIMIT = 1e-6


def parse_lambdas(text: str) -> list[float]:
    """``"50,100,200"`` or geometric ``"a:b:factor"`` (inclusive of ``b``)."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range {text!r} must look like a:b:factor")
        a, b, q = (float(p) for p in parts)
        if a <= 0 or b < a or q <= 1:
            raise ValueError("range needs 0 < a <= b and factor > 1")
        out, v = [], a
        while v <= b * (1 + 1e-12):
            out.append(v)
            v *= q
        return out
    vals = [float(p) for p in text.split(",") if p.strip()]
    if not vals:
        raise ValueError("empty λ list")
    return vals


def _read_model(path: str):
    text = sys.stdin.read() if path == "-" else open(path, encoding="utf-8").read()
    return io.loads_model(text)


def _integrand(model: Model, source: dict | None, L: int | None) -> tuple[LaplaceIntegrand, Model]:
    """Rebuild the integrand named in ``source`` or fall back to the Taylor polynomials."""
    if source is not None:
        params = dict(source.get("params", {}))
        if L is not None and "L" in params:
            params["L"] = L
        integrand = build_integrand(source["name"], params)
        return integrand, integrand.model_for(L if L is not None else model.L)
    target = model if L is None else _override(model, L)
    if not target.f_tensors and not target.logg_tensors:
        return gaussian_model(target.d, target.L), target
    confine = max(target.max_entry(), 1e-3)
    return polynomial_integrand(target, confine=confine), target


def _override(model: Model, L: int) -> Model:
    if L > model.L and (model.f_tensors or model.logg_tensors):
        raise ValueError(f"--L {L} exceeds the file's L={model.L}; higher derivatives are unknown")
    return model.with_L(L)


def _paths(model: Model, method: str) -> dict:
    out = {}
    if method in ("cumulant", "both"):
        out["cumulant"] = expand(model)
    if method in ("quadratize", "both"):
        out["quadratize"] = run_pipeline(model)
    return out


def _max_rel(a, b) -> float:
    worst = 0.0
    for x, y in zip(a, b):
        scale = max(abs(x), abs(y))
        if scale:
            worst = max(worst, abs(x - y) / scale)
    return worst


def _summary_diagnostics(res) -> dict:
    keep = {}
    for key in ("term_counts", "b1_rel_discrepancy", "b1_check_passed", "elapsed", "Q_series"):
        if key in res.diagnostics:
            keep[key] = res.diagnostics[key]
    if "stages" in res.diagnostics:
        keep["stage_monomials"] = {str(k): v.get("monomials") for k, v in res.diagnostics["stages"].items()}
    return keep


def cmd_coeffs(args) -> dict:
    model, source = _read_model(args.model)
    if args.L is not None:
        model = _integrand(model, source, args.L)[1] if source else _override(model, args.L)
    results = _paths(model, args.method)
    report = {
        "command": "coeffs",
        "model": {"label": model.label, "d": model.d, "L": model.L},
        "coefficients": {k: list(r.coefficients) for k, r in results.items()},
        "diagnostics": {k: _summary_diagnostics(r) for k, r in results.items()},
    }
    checks = []
    if len(results) == 2:
        gap = _max_rel(results["cumulant"].coefficients, results["quadratize"].coefficients)
        report["max_rel_discrepancy"] = gap
        checks.append({"name": "dual-path agreement", "passed": gap <= DISCREPANCY_LIMIT,
                       "detail": f"max relative discrepancy {gap:.3e} (limit {DISCREPANCY_LIMIT:g})"})
    report["checks"] = checks
    return report


def cmd_verify(args) -> dict:
    model, source = _read_model(args.model)
    integrand, model = _integrand(model, source, args.L)
    lam = float(args.lam)
    if not lam > 0:
        raise ValueError("--lambda must be positive")
    coeffs = expand(model).coefficients
    est = run_oracle(integrand, lam, args.oracle, rel_tol=args.rel_tol, nodes=args.nodes,
                     samples=args.samples, seed=args.seed)
    approx = float(sum(b * lam ** -(k + 1) for k, b in enumerate(coeffs)))
    rem = est.log_I - approx
    row = {"lambda": lam, "log_I_oracle": est.log_I, "log_I_expansion": approx, "remainder": rem,
           "std_error": est.std_error, "method": est.method, "samples_or_nodes": est.samples_or_nodes,
           "converged": est.converged}
    if est.seed is not None:
        row["seed"] = est.seed
    if integrand.problem is not None and lam == integrand.problem.n:
        base = log_evidence_terms(integrand.problem, integrand.problem.n)
        row["log_evidence_oracle"] = base + est.log_I
        row["log_evidence_bic"] = base
        row["log_evidence_corrected"] = base + approx
    checks = [{"name": "oracle converged", "passed": bool(est.converged),
               "detail": "quadrature stable under a 20-node reduction" if est.method == "ghq" else ""}]
    if args.max_remainder is not None:
        budget = args.max_remainder + 4 * est.std_error
        checks.append({"name": "remainder bound", "passed": abs(rem) <= budget,
                       "detail": f"|remainder| = {abs(rem):.3e}, allowed {budget:.3e}"})
    return {"command": "verify", "model": {"label": model.label, "d": model.d, "L": model.L},
            "coefficients": {"cumulant": list(coeffs)}, "oracle_rows": [row], "checks": checks}


def cmd_sweep(args) -> dict:
    model, source = _read_model(args.model)
    integrand, model = _integrand(model, source, args.L)
    lambdas = parse_lambdas(args.lambdas)
    coeffs = expand(model).coefficients
    rows, fit = remainder_sweep(integrand, lambdas, model.L, args.oracle, rel_tol=args.rel_tol,
                                nodes=args.nodes, samples=args.samples, seed=args.seed,
                                coefficients=coeffs)
    csv = io.sweep_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(csv)
    report = {"command": "sweep", "model": {"label": model.label, "d": model.d, "L": model.L},
              "coefficients": {"cumulant": list(coeffs)},
              "oracle_rows": [{"lambda": r.lam, "log_I_oracle": r.log_I_oracle,
                               "log_I_expansion": r.log_I_expansion, "remainder": r.remainder,
                               "std_error": r.oracle_std_error, "usable": r.usable, "note": r.note}
                              for r in rows],
              "flagged_rows": [r.lam for r in rows if not r.usable],
              "slope": None if fit is None else {"value": fit.slope, "stderr": fit.stderr,
                                                 "rows": fit.n_rows},
              "checks": []}
    if args.expect_slope is not None:
        ok = fit is not None and abs(fit.slope - args.expect_slope) <= args.slope_tol
        got = "no fit" if fit is None else f"{fit.slope:.4f}"
        report["checks"].append({"name": "remainder slope", "passed": ok,
                                 "detail": f"slope {got}, expected {args.expect_slope} ± {args.slope_tol}"})
    if not args.out:
        report["csv"] = csv
    return report


def cmd_builtin(args) -> str:
    name = args.name
    if name == "quartic":
        params = {"d": args.d, "L": args.L}
    elif name == "gaussian":
        params = {"d": args.d, "L": args.L}
    elif name == "random":
        params = {"d": args.d, "L": args.L, "seed": args.seed, "scale": args.scale}
    elif name == "logreg":
        x_star = None if args.x_star is None else [float(v) for v in args.x_star.split(",")]
        params = {"n": args.n, "d": args.d, "seed": args.seed, "x_star": x_star,
                  "psi": args.psi, "L": args.L}
    else:
        raise ValueError(f"unknown builtin {name!r}")
    integrand = build_integrand(name, params)
    return io.dumps_model(integrand.model, integrand.source)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loglaplace",
                                description="Coefficients of the Laplace log-expansion and their verification.")
    sub = p.add_subparsers(dest="command", required=True)

    def model_args(sp):
        sp.add_argument("--model", required=True, help="model file path, or '-' for stdin")
        sp.add_argument("--L", type=int, default=None, help="override the order bound")
        sp.add_argument("--out", default=None, help="output path (default: stdout)")

    def oracle_args(sp, default):
        sp.add_argument("--oracle", choices=("radial", "ghq", "mc"), default=default)
        sp.add_argument("--samples", type=int, default=100_000, help="Monte Carlo sample count")
        sp.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")
        sp.add_argument("--nodes", type=int, default=60, help="Gauss-Hermite nodes per dimension")
        sp.add_argument("--rel-tol", type=float, default=1e-12, help="radial quadrature tolerance")

    c = sub.add_parser("coeffs", help="compute b_1..b_{L-1}")
    model_args(c)
    c.add_argument("--method", choices=("cumulant", "quadratize", "both"), default="both")

    v = sub.add_parser("verify", help="compare the expansion with a numerical oracle at one λ")
    model_args(v)
    v.add_argument("--lambda", dest="lam", type=float, required=True)
    oracle_args(v, "ghq")
    v.add_argument("--max-remainder", type=float, default=None,
                   help="fail if |remainder| exceeds this (plus 4 standard errors)")

    s = sub.add_parser("sweep", help="remainder versus λ, written as CSV")
    model_args(s)
    s.add_argument("--lambdas", "--lambda", dest="lambdas", required=True,
                   help="comma list or a:b:factor geometric range")
    oracle_args(s, "ghq")
    s.add_argument("--expect-slope", type=float, default=None)
    s.add_argument("--slope-tol", type=float, default=0.15)

    b = sub.add_parser("builtin", help="write a built-in model file")
    b.add_argument("name", choices=("quartic", "logreg", "random", "gaussian"))
    b.add_argument("--d", type=int, default=2)
    b.add_argument("--L", type=int, default=2)
    b.add_argument("--n", type=int, default=200, help="logistic sample size")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--x-star", default=None, help="comma-separated minimizer (logistic)")
    b.add_argument("--psi", choices=("logistic", "quadratic"), default="logistic")
    b.add_argument("--scale", type=float, default=0.1, help="random-model entry scale")
    b.add_argument("--out", default=None)
    return p


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "builtin":
            _emit(cmd_builtin(args), args.out)
            return 0
        handler = {"coeffs": cmd_coeffs, "verify": cmd_verify, "sweep": cmd_sweep}[args.command]
        report = handler(args)
        text = io.dumps_report(report)
        if args.command == "sweep":
            sys.stdout.write(text)
        else:
            _emit(text, args.out)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    failed = [c for c in report.get("checks", []) if not c["passed"]]
    for c in failed:
        print(f"check failed: {c['name']}: {c['detail']}", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
