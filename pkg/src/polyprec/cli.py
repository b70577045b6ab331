"""Command-line harness: single runs, batches, spectra, and the verifier suite.

Exit codes: 0 on success, 1 on usage errors, 2 when verification hard-fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .datasets import (
    SyntheticSpectrumSpec,
    parse_libsvm,
    standardize_columns,
    synthetic_design,
)
from .diagnostics import run_verification_suite, xi_table
from .experiments import ExperimentConfig, merge_plotdata, run_bench, run_experiment
from .operators import GramOperator, spectral_decomposition

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_problem_flags(parser):
    parser.add_argument("--dataset", help="sparse classification file")
    parser.add_argument(
        "--synthetic",
        metavar="L1,L2,TAIL,N",
        help="planted curvature spectrum lam1,lam2,tail,n",
    )
    parser.add_argument("--rows", type=int, help="row count for synthetic designs")
    parser.add_argument("--loss", default="logistic", help="'logistic' or 'huber:WIDTH'")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--no-standardize",
        action="store_true",
        help="skip unit-column scaling of dataset features",
    )


def _parse_synthetic(text):
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError("--synthetic needs lam1,lam2,tail,n")
    return float(parts[0]), float(parts[1]), float(parts[2]), int(parts[3])


def _config_from_args(args) -> ExperimentConfig:
    config = ExperimentConfig(
        name=args.name,
        method=args.method,
        precond=args.precond,
        tau=args.tau,
        dataset=args.dataset,
        synthetic=_parse_synthetic(args.synthetic) if args.synthetic else None,
        rows=args.rows,
        loss=args.loss,
        max_iters=args.max_iters,
        tol=args.tol,
        seed=args.seed,
        out_dir=args.out,
        standardize=not args.no_standardize,
    )
    config.validate()
    return config


def _cmd_solve(args) -> int:
    summary = run_experiment(_config_from_args(args))
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_bench(args) -> int:
    summaries = run_bench(args.configs, out_dir=args.out)
    for summary in summaries:
        name = summary["config"]["name"]
        print(
            f"{name}: {summary['iterations']} iters, "
            f"{summary['total_matvecs']} matvecs, {summary['termination']}"
        )
    return 0


def _cmd_spectrum(args) -> int:
    if (args.dataset is None) == (args.synthetic is None):
        print("spectrum: need exactly one of --dataset/--synthetic", file=sys.stderr)
        return 1
    if args.dataset is not None:
        dataset = parse_libsvm(args.dataset)
        if not args.no_standardize:
            dataset = standardize_columns(dataset)
        design = dataset.to_dense()
    else:
        lam1, lam2, tail, n = _parse_synthetic(args.synthetic)
        spec = SyntheticSpectrumSpec(
            lam1=lam1, lam2=lam2, tail=tail, n=n, seed=args.seed, rows=args.rows
        )
        design = synthetic_design(spec)
    op = GramOperator(design)
    dec = spectral_decomposition(op)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    eig_path = out_dir / "eigenvalues.csv"
    with open(eig_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "eigenvalue"])
        for i, value in enumerate(dec.eigenvalues, start=1):
            writer.writerow([i, repr(float(value))])
    tau_max = min(args.tau_max, op.dim - 1)
    table = xi_table(dec.eigenvalues, tau_max)
    xi_path = out_dir / "xi_table.csv"
    with open(xi_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["tau", "xi", "cond"])
        for tau, xi, cond in table.rows:
            writer.writerow([tau, repr(xi), repr(cond)])
    print(f"wrote {eig_path} and {xi_path}")
    print(f"lam1={dec.lam_max:.6g} lam_n={dec.lam_min:.6g} cond={dec.lam_max / dec.lam_min:.6g}")
    return 0


def _cmd_verify(args) -> int:
    reports = run_verification_suite(seed=args.seed)
    hard_fail = False
    lines = []
    for report in reports:
        status = "pass" if report.passed else ("FLAG" if report.advisory else "FAIL")
        if not report.passed and not report.advisory:
            hard_fail = True
        lines.append(report.to_dict())
        print(f"[{status}] {report.check} (max slack {report.max_slack:.3e})")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w") as handle:
            json.dump(lines, handle, indent=2)
        print(f"wrote {args.out}")
    return 2 if hard_fail else 0


def _cmd_plotdata(args) -> int:
    merged = merge_plotdata(args.rundir, args.out)
    print(f"merged {merged} runs into {args.out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="polyprec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one method on one problem")
    solve.add_argument("--name", default="run")
    solve.add_argument(
        "--method",
        default="adaptive-gm",
        choices=["gm", "fgm", "adaptive-gm", "adaptive-fgm", "krylov"],
    )
    solve.add_argument(
        "--precond",
        default="identity",
        help="identity | sympoly:T | chebyshev:T | cutting:T | inverse",
    )
    solve.add_argument("--tau", type=int, default=0, help="krylov subspace degree")
    _add_problem_flags(solve)
    solve.add_argument("--max-iters", type=int, default=1000)
    solve.add_argument("--tol", type=float, help="optimality-gap target")
    solve.add_argument("--out", default=".", help="output directory")
    solve.set_defaults(func=_cmd_solve)

    bench = sub.add_parser("bench", help="run a batch of config files")
    bench.add_argument("configs", nargs="+", help="key=value config files")
    bench.add_argument("--out", help="override output directory")
    bench.set_defaults(func=_cmd_bench)

    spectrum = sub.add_parser("spectrum", help="eigenvalues and shrink table of a problem")
    _add_problem_flags(spectrum)
    spectrum.add_argument("--tau-max", type=int, default=8)
    spectrum.add_argument("--out", default=".")
    spectrum.set_defaults(func=_cmd_spectrum)

    verify = sub.add_parser("verify", help="run the identity and envelope verifiers")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--out", help="write the JSON report here")
    verify.set_defaults(func=_cmd_verify)

    plotdata = sub.add_parser("plotdata", help="merge run CSVs into a long table")
    plotdata.add_argument("rundir")
    plotdata.add_argument("--out", default="plotdata.csv")
    plotdata.set_defaults(func=_cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, FileNotFoundError) as exc:
        print(f"polyprec: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
