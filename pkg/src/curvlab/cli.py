"""Command-line entry point.

Exit codes: 0 success, 1 hypothesis failure (``hypotheses`` only),
2 lambda below lambda0, 3 numerical degeneracy, 4 invalid scenario or usage.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dsl, runner
from .domain import DegenerateError, DomainError
from .exterior import ExteriorError
from .riemann import MetricError
from .scenario import ScenarioError, load_scenario
from .surface import LambdaError

EXIT_OK, EXIT_HYPOTHESIS, EXIT_LAMBDA, EXIT_DEGENERATE, EXIT_USAGE = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _plain(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])


def write_json(path: Path, obj):
    path.write_text(dumps(obj))


def _lambdas(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("lambdas must be positive")
    return vals


def _sigma(text):
    v = float(text)
    if not 1.0 <= v < 1.5:
        raise argparse.ArgumentTypeError(f"sigma must lie in [1, 3/2), got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="curvlab", description="Smoothed-polytope, Morrey, Clifford and Hawking-mass checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, scenario_required=True):
        if scenario_required:
            sp.add_argument("scenario", help="scenario JSON file or shipped scenario name")
        sp.add_argument("--out-dir", type=Path, default=Path("."), help="directory for output files")
        sp.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
        sp.add_argument("--workers", type=_positive_int, default=1, help="thread count for sampling")

    def sampling(sp):
        sp.add_argument("--lambdas", type=_lambdas, help="comma-separated lambda list")
        sp.add_argument("--rays", type=_positive_int, help="ray count per lambda")
        sp.add_argument("--sigma", type=_sigma, help="Morrey exponent in [1, 1.5)")

    sp = sub.add_parser("hypotheses", help="pointwise hypothesis checks over boundary samples")
    common(sp)
    sp = sub.add_parser("sweep", help="lambda sweep table")
    common(sp)
    sampling(sp)
    sp.add_argument("--samples", action="store_true", help="also write per-lambda surface sample tables")
    sp = sub.add_parser("morrey", help="Morrey report with per-stratum fits")
    common(sp)
    sampling(sp)
    sp = sub.add_parser("clifford-check", help="Clifford representation and chi residuals")
    common(sp, scenario_required=False)
    sp.add_argument("--dims", type=lambda t: [int(v) for v in t.split(",")], default=[3, 5, 7])
    sp.add_argument("--pairs", type=int, default=100)
    sp = sub.add_parser("imcf", help="flow trace and mass-chain report for an exterior")
    common(sp)
    sp = sub.add_parser("report", help="all checks for one scenario bundled into JSON")
    common(sp)
    sampling(sp)
    return p


def _run(args) -> int:
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "clifford-check":
        res = runner.clifford_check(tuple(args.dims), args.pairs)
        write_json(out / "clifford.json", res)
        sys.stdout.write(dumps(res))
        ok = all(
            r["anticommutator"] < 1e-12 and r["chi_squared"] < 1e-12 and r["chi_isometry"] < 1e-12 and r["kernel_dimension_ok"]
            for r in res["rows"]
        )
        return EXIT_OK if ok else EXIT_DEGENERATE

    sc = load_scenario(args.scenario)
    prefix = out / sc.name
    if args.command == "hypotheses":
        res = runner.hypotheses(sc)
        write_json(Path(f"{prefix}_hypotheses.json"), res)
        for key, val in res.items():
            if isinstance(val, dict):
                print(f"{key:24s} {'PASS' if val['passed'] else 'FAIL'} worst={val['worst']!r} n={val['count']}")
        for row in res.get("checks", []):
            print(f"{row['check']:28s} {'PASS' if row['passed'] else 'FAIL'} margin={row['margin']!r}")
        return EXIT_OK if res["passed"] else EXIT_HYPOTHESIS

    if args.command in ("sweep", "morrey"):
        if sc.kind != "polytope":
            raise ScenarioError(f"kind: {args.command} needs a polytope scenario")
        runner.warn_hypotheses(sc)
        res = runner.sweep(sc, args.lambdas, args.rays, args.sigma, args.workers, keep_samples=args.samples if args.command == "sweep" else False)
        rows = runner.sweep_rows(res)
        cols = runner.sweep_columns(sc.domain.n)
        if args.command == "sweep":
            if args.format == "csv":
                write_csv(Path(f"{prefix}_sweep.csv"), rows, cols)
            else:
                write_json(Path(f"{prefix}_sweep.json"), rows)
            for samples in res.samples:
                stem = f"{prefix}_samples_lambda{samples.lam:g}"
                srows = runner._sample_rows(samples)
                if args.format == "csv":
                    write_csv(Path(stem + ".csv"), srows, runner.sample_columns(sc.domain.n))
                else:
                    write_json(Path(stem + ".json"), srows)
        else:
            rep = runner.morrey_report(sc, res)
            write_json(Path(f"{prefix}_morrey.json"), rep)
            if args.format == "csv":
                write_csv(Path(f"{prefix}_morrey.csv"), rows, cols)
        for row in rows:
            print(" ".join(f"{c}={row[c]!r}" for c in cols if c in runner.SWEEP_COLUMNS))
        return EXIT_OK

    if args.command == "imcf":
        if sc.kind != "exterior":
            raise ScenarioError("kind: imcf needs an exterior scenario")
        res = runner.imcf(sc)
        cols = ("t", "s", "area", "H", "m_H")
        if args.format == "csv":
            write_csv(Path(f"{prefix}_flow.csv"), res["flow"], cols)
        else:
            write_json(Path(f"{prefix}_flow.json"), res["flow"])
        write_json(Path(f"{prefix}_prop42.json"), res["prop42"])
        for row in res["prop42"]["checks"]:
            status = {True: "PASS", False: "FAIL", None: "N/A "}[row["passed"]]
            print(f"{row['check']:28s} {status} margin={row['margin']!r} {row['note']}".rstrip())
        return EXIT_OK

    if args.command == "report":
        res = runner.report(sc, args.lambdas, args.rays, args.sigma, args.workers)
        write_json(Path(f"{prefix}_report.json"), res)
        print(f"wrote {prefix}_report.json")
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except LambdaError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_LAMBDA
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateError, MetricError, dsl.EvalError, DomainError, ExteriorError, np.linalg.LinAlgError) as e:
        print(f"error: numerical degeneracy: {e}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
