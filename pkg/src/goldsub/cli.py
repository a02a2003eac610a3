"""Command-line front end: solve, verify, and bench subcommands.

Documents are JSON (see serialize).  Exit codes are stable:

    0  success
    2  usage or configuration error
    3  call budget or iteration cap exhausted
    4  infeasible starting point
    5  oracle returned non-finite or malformed output
    6  certificate failed verification
    7  certificate corrupt (stored vectors disagree with recomputation)
    8  bisection step cap exhausted (nonconvexity metadata understated)

The default output directory is --out-dir, then $GOLDSUB_OUT_DIR, then the
working directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import (BudgetExceededError, GoldsubError, InfeasibleStartError,
                     ModulusError, OracleError, UsageError)
from .inner_bisect import bisect_call_budget
from .inner_rand import rand_call_budget
from .problems import get_problem, list_problems
from .serialize import (certificate_data, certificate_from_data,
                        config_from_data, manifest_data, read_json,
                        trace_data, write_json)
from .solver import BISECT, RAND, solve
from .verify import check_certificate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BUDGET = 3
EXIT_INFEASIBLE = 4
EXIT_ORACLE = 5
EXIT_VERIFY_FAILED = 6
EXIT_CORRUPT = 7
EXIT_MODULUS = 8


def _out_dir(arg: str | None) -> str:
    return arg or os.environ.get("GOLDSUB_OUT_DIR") or "."


def _parse_param(text: str):
    key, sep, raw = text.partition("=")
    if not sep:
        raise UsageError("--param expects KEY=VALUE, got %r" % text)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _parse_x0(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",")]
    except ValueError:
        raise UsageError("--x0 expects comma-separated reals, got %r" % text) from None


def _load_json(path: str):
    try:
        return read_json(path)
    except FileNotFoundError:
        raise UsageError("no such file: %s" % path) from None
    except json.JSONDecodeError as exc:
        raise UsageError("%s does not parse as JSON: %s" % (path, exc)) from None


def _problem_from_spec(entry) -> tuple[str, dict]:
    if isinstance(entry, str):
        return entry, {}
    if isinstance(entry, dict) and "name" in entry:
        return str(entry["name"]), dict(entry.get("params", {}))
    raise UsageError("problem entries must be a name or {name, params}")


def _resolve_solve_inputs(args):
    file_data = _load_json(args.config) if args.config else {}
    name, params = None, {}
    if "problem" in file_data:
        name, params = _problem_from_spec(file_data["problem"])
    if args.problem:
        name = args.problem
    if args.param:
        for text in args.param:
            key, value = _parse_param(text)
            params[key] = value
    if name is None:
        raise UsageError("no problem given; use --problem or a config file "
                         "(registered: %s)" % ", ".join(list_problems()))

    record = get_problem(name, **params)

    config_map = dict(file_data.get("config", {}))
    overrides = {
        "delta": args.delta,
        "target_eps": args.eps,
        "inner": args.inner,
        "seed": args.seed,
        "tau": args.tau,
        "gcq_sigma": args.sigma,
        "kkt_mode": args.kkt,
        "outer_cap": args.outer_cap,
        "inner_call_cap": args.call_cap,
        "slackness_samples": args.slack_samples,
    }
    for key, value in overrides.items():
        if value is not None:
            config_map[key] = value
    config = config_from_data(config_map)
    if args.x0 is not None:
        x0 = _parse_x0(args.x0)
    elif "x0" in file_data:
        x0 = [float(v) for v in file_data["x0"]]
    else:
        x0 = record.start
    return record, config, np.asarray(x0, dtype=float)


def cmd_solve(args) -> int:
    record, config, x0 = _resolve_solve_inputs(args)
    out = _out_dir(args.out_dir)
    tag = args.tag or "%s-%s-d%g-e%g-s%d" % (
        record.name, config.inner, config.delta, config.target_eps, config.seed)
    manifest = manifest_data(record.name, record.params, config, __version__)

    try:
        cert, trace = solve(record.spec, config, x0)
    except BudgetExceededError as err:
        partial = err.partial or {}
        if "trace" in partial:
            path = os.path.join(out, tag + ".partial-trace.json")
            write_json(path, trace_data(partial["trace"], manifest))
            print("budget exhausted; partial trace written to %s" % path,
                  file=sys.stderr)
        print("error: %s" % err, file=sys.stderr)
        return EXIT_BUDGET

    cert_path = os.path.join(out, tag + ".cert.json")
    trace_path = os.path.join(out, tag + ".trace.json")
    manifest_path = os.path.join(out, tag + ".manifest.json")
    write_json(cert_path, certificate_data(cert, manifest))
    write_json(trace_path, trace_data(trace, manifest))
    write_json(manifest_path, manifest_data(record.name, record.params, config,
                                            __version__, created=True))

    lam = "undefined" if cert.lam is None else "%.6g" % cert.lam
    print("problem %s  inner=%s  delta=%g  eps_effective=%.6g"
          % (record.name, config.inner, config.delta, cert.eps_effective))
    print("stationary after %d outer steps, %d oracle calls, %d value calls, %.3fs"
          % (trace.outer_steps, trace.oracle_calls, trace.value_calls,
             trace.wall_time_s))
    print("f = %.9g  g = %.9g  ||zeta|| = %.6g  gamma0 = %.6g  lambda = %s"
          % (cert.f_anchor, cert.g_anchor, cert.zeta_norm, cert.gamma0, lam))
    for warning in cert.warnings:
        print("warning: %s" % warning, file=sys.stderr)
    print("certificate: %s" % cert_path)
    print("trace:       %s" % trace_path)
    print("manifest:    %s" % manifest_path)
    return EXIT_OK


def cmd_verify(args) -> int:
    data = _load_json(args.certificate)
    cert, manifest = certificate_from_data(data)
    if args.problem:
        name, params = args.problem, {}
        if args.param:
            for text in args.param:
                key, value = _parse_param(text)
                params[key] = value
    elif manifest and "problem" in manifest:
        name, params = _problem_from_spec(manifest["problem"])
    else:
        raise UsageError("certificate has no embedded manifest; "
                         "pass --problem (and --param) explicitly")
    record = get_problem(name, **params)

    report = check_certificate(cert, record.spec,
                               slackness_samples=args.slack_samples,
                               estimate_samples=args.estimate_samples,
                               seed=args.seed,
                               stop_at_first_failure=args.fast)
    for check in report.checks:
        print("%s  %-24s %s" % ("PASS" if check.passed else "FAIL",
                                check.name, check.detail))
    if report.passed:
        print("certificate OK (%d checks)" % len(report.checks))
        return EXIT_OK
    print("certificate REJECTED: %s" % report.reason, file=sys.stderr)
    return EXIT_CORRUPT if report.corrupt else EXIT_VERIFY_FAILED


def _bench_budget(trace, spec):
    """Per-invocation inner budget for a finished cell, None when unknown."""
    if trace.inner == RAND:
        if trace.tau_prime is None:
            return None
        return rand_call_budget(spec.lipschitz_m, trace.eps_effective,
                                trace.tau_prime)
    if spec.nonconvexity_f is None or spec.nonconvexity_g is None:
        return None
    return bisect_call_budget(spec.lipschitz_m, trace.eps_effective,
                              spec.nonconvexity_f + spec.nonconvexity_g)


def _write_text(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as handle:
        handle.write(text)
    os.replace(tmp, path)


def cmd_bench(args) -> int:
    suite = _load_json(args.suite)
    problems = suite.get("problems")
    if not problems:
        raise UsageError("suite needs a nonempty 'problems' list")
    inners = suite.get("inners", [RAND])
    seeds = suite.get("seeds", [0])
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    grid = suite.get("grid", [{"delta": 0.05, "eps": 0.05}])
    base_config = dict(suite.get("config", {}))

    out = _out_dir(args.out_dir)
    series_dir = os.path.join(out, "series")
    os.makedirs(series_dir, exist_ok=True)

    rows = []
    failures = 0
    for entry in problems:
        name, params = _problem_from_spec(entry)
        record = get_problem(name, **params)
        for inner in inners:
            for cell in grid:
                for seed in seeds:
                    config_map = dict(base_config)
                    config_map.update({
                        "delta": float(cell["delta"]),
                        "target_eps": float(cell["eps"]),
                        "inner": inner,
                        "seed": int(seed),
                    })
                    config = config_from_data(config_map)
                    cell_id = "%s-%s-d%g-e%g-s%d" % (
                        name, inner, config.delta, config.target_eps, seed)
                    row = {"problem": name, "params": params, "inner": inner,
                           "seed": seed, "delta": config.delta,
                           "eps": config.target_eps, "cell": cell_id}
                    started = time.perf_counter()
                    try:
                        cert, trace = solve(record.spec, config, record.start)
                    except GoldsubError as err:
                        failures += 1
                        row.update(status=type(err).__name__, error=str(err))
                        rows.append(row)
                        continue
                    budget = _bench_budget(trace, record.spec)
                    max_inner = max(r["inner_oracle_calls"] for r in trace.records)
                    row.update(
                        status="ok",
                        outer_steps=trace.outer_steps,
                        lemma_bound=trace.lemma_bound,
                        lemma_ratio=(None if trace.lemma_bound is None
                                     else trace.outer_steps / trace.lemma_bound),
                        oracle_calls=trace.oracle_calls,
                        value_calls=trace.value_calls,
                        inner_budget=budget,
                        max_inner_calls=max_inner,
                        budget_ratio=None if budget is None else max_inner / budget,
                        f_final=cert.f_anchor, g_final=cert.g_anchor,
                        zeta_norm=cert.zeta_norm, gamma0=cert.gamma0,
                        wall_s=time.perf_counter() - started,
                    )
                    rows.append(row)
                    lines = ["k,f,g,zeta_norm"]
                    lines += ["%d,%.17g,%.17g,%.17g"
                              % (r["k"], r["f"], r["g"], r["zeta_norm"])
                              for r in trace.records]
                    _write_text(os.path.join(series_dir, cell_id + ".csv"),
                                "\n".join(lines) + "\n")

    write_json(os.path.join(out, "bench-summary.json"),
               {"schema": "goldsub.bench/1", "rows": rows})

    header = ("problem", "inner", "seed", "delta", "eps", "steps",
              "lemma", "calls", "budget-ratio", "status")
    table = [header]
    for row in rows:
        table.append((
            row["problem"], row["inner"], str(row["seed"]),
            "%g" % row["delta"], "%g" % row["eps"],
            str(row.get("outer_steps", "-")),
            "-" if row.get("lemma_bound") is None else str(row["lemma_bound"]),
            str(row.get("oracle_calls", "-")),
            "-" if row.get("budget_ratio") is None
            else "%.3f" % row["budget_ratio"],
            row["status"],
        ))
    widths = [max(len(line[i]) for line in table) for i in range(len(header))]
    for line in table:
        print("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(line)))
    print("%d cells, %d failed; summary in %s"
          % (len(rows), failures, os.path.join(out, "bench-summary.json")))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="goldsub",
        description="Feasible descent for Lipschitz objectives under "
                    "Lipschitz inequality constraints, with checkable "
                    "stationarity certificates.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="run the solver and write certificate + trace")
    ps.add_argument("--config", help="JSON config file")
    ps.add_argument("--problem", help="registered problem name")
    ps.add_argument("--param", action="append",
                    help="problem parameter KEY=VALUE (repeatable)")
    ps.add_argument("--x0", help="comma-separated starting point")
    ps.add_argument("--delta", type=float)
    ps.add_argument("--eps", type=float, help="target stationarity tolerance")
    ps.add_argument("--inner", choices=(RAND, BISECT))
    ps.add_argument("--seed", type=int)
    ps.add_argument("--tau", type=float,
                    help="total failure probability for the randomized search")
    ps.add_argument("--kkt", action="store_const", const=True, default=None,
                    help="run in KKT mode (requires --sigma)")
    ps.add_argument("--sigma", type=float,
                    help="constraint qualification level for KKT mode")
    ps.add_argument("--outer-cap", type=int)
    ps.add_argument("--call-cap", type=int, help="inner oracle-call cap")
    ps.add_argument("--slack-samples", type=int,
                    help="complementary-slackness samples at certification")
    ps.add_argument("--out-dir")
    ps.add_argument("--tag", help="output file basename")
    ps.set_defaults(func=cmd_solve)

    pv = sub.add_parser("verify", help="re-check a certificate from scratch")
    pv.add_argument("certificate", help="certificate JSON file")
    pv.add_argument("--problem", help="problem name when no manifest is embedded")
    pv.add_argument("--param", action="append",
                    help="problem parameter KEY=VALUE (repeatable)")
    pv.add_argument("--slack-samples", type=int, default=10_000)
    pv.add_argument("--estimate-samples", type=int, default=10_000)
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--fast", action="store_true",
                    help="stop at the first failed check")
    pv.set_defaults(func=cmd_verify)

    pb = sub.add_parser("bench", help="run a problems x inners x seeds x grid suite")
    pb.add_argument("--suite", required=True, help="suite JSON file")
    pb.add_argument("--out-dir")
    pb.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleStartError as err:
        print("error: %s" % err, file=sys.stderr)
        return EXIT_INFEASIBLE
    except ModulusError as err:
        print("error: %s" % err, file=sys.stderr)
        return EXIT_MODULUS
    except BudgetExceededError as err:
        print("error: %s" % err, file=sys.stderr)
        return EXIT_BUDGET
    except OracleError as err:
        print("error: %s" % err, file=sys.stderr)
        return EXIT_ORACLE
    except UsageError as err:
        print("error: %s" % err, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
