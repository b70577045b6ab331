"""Experiment configs, benchmark runs, and plot-ready CSV emission.

A run writes one CSV of per-iteration telemetry (`iter,fval,gap,matvecs,
grad_evals,ls_trials,M_k,time_ms`) plus a JSON summary. Gaps are measured
against a high-accuracy reference optimum computed per problem, so identical
seeds give identical CSVs apart from the wall-clock column.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .datasets import (
    SyntheticSpectrumSpec,
    logistic_from_dataset,
    parse_libsvm,
    synth_regression,
)
from .krylov import run_krylov_gm
from .preconditioners import build_from_descriptor, compute_alpha_beta
from .problems import CompositeObjective, HuberLoss, LogisticLoss
from .solvers import (
    RunResult,
    SolverConfig,
    initial_guess_M,
    run_adaptive_fgm,
    run_adaptive_gm,
    run_fgm,
    run_gm,
)

__all__ = [
    "ExperimentConfig",
    "CSV_HEADER",
    "parse_config_file",
    "build_problem",
    "reference_optimum",
    "run_experiment",
    "run_bench",
    "merge_plotdata",
    "read_run_csv",
]

CSV_HEADER = ["iter", "fval", "gap", "matvecs", "grad_evals", "ls_trials", "M_k", "time_ms"]

METHODS = ("gm", "fgm", "adaptive-gm", "adaptive-fgm", "krylov")


@dataclass
class ExperimentConfig:
    """One benchmark run: problem source, method, preconditioner, budgets."""

    name: str = "run"
    method: str = "adaptive-gm"
    precond: str = "identity"
    tau: int = 0
    dataset: str | None = None
    synthetic: tuple | None = None  # (lam1, lam2, tail, n)
    rows: int | None = None
    loss: str = "logistic"
    max_iters: int = 1000
    tol: float | None = None  # optimality-gap target against the reference
    seed: int = 0
    out_dir: str = "."
    standardize: bool = True
    reference_iters: int | None = None

    def validate(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.method == "krylov" and self.precond not in ("identity",):
            raise ValueError("the krylov method chooses its own polynomial; drop --precond")
        if (self.dataset is None) == (self.synthetic is None):
            raise ValueError("exactly one of dataset or synthetic must be given")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


def _parse_loss(text: str):
    if text == "logistic":
        return LogisticLoss()
    if text.startswith("huber"):
        parts = text.split(":")
        width = float(parts[1]) if len(parts) > 1 else 0.1
        return HuberLoss(width)
    raise ValueError(f"unknown loss {text!r} (expected 'logistic' or 'huber:WIDTH')")


def parse_config_file(path) -> ExperimentConfig:
    """Flat key=value lines with '#' comments."""
    values: dict = {}
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    config = ExperimentConfig(name=Path(path).stem)
    for key, raw in values.items():
        if key in ("name", "method", "precond", "dataset", "loss", "out_dir"):
            setattr(config, key, raw)
        elif key in ("tau", "max_iters", "seed", "rows", "reference_iters"):
            setattr(config, key, int(raw))
        elif key == "tol":
            config.tol = float(raw)
        elif key == "standardize":
            config.standardize = raw.lower() in ("1", "true", "yes", "on")
        elif key == "synthetic":
            parts = [float(v) for v in raw.split(",")]
            if len(parts) != 4:
                raise ValueError(f"{path}: synthetic needs lam1,lam2,tail,n")
            config.synthetic = (parts[0], parts[1], parts[2], int(parts[3]))
        else:
            raise ValueError(f"{path}: unknown config key {key!r}")
    config.validate()
    return config


def build_problem(config: ExperimentConfig) -> CompositeObjective:
    """Fresh objective (own operator and counters) from a config."""
    if config.dataset is not None:
        dataset = parse_libsvm(config.dataset)
        if not config.loss.startswith("logistic"):
            raise ValueError("dataset runs use the logistic loss")
        return logistic_from_dataset(dataset, standardize=config.standardize)
    lam1, lam2, tail, n = config.synthetic
    spec = SyntheticSpectrumSpec(
        lam1=lam1, lam2=lam2, tail=tail, n=n, seed=config.seed, rows=config.rows
    )
    objective, _ = synth_regression(spec, _parse_loss(config.loss))
    return objective


def reference_optimum(config: ExperimentConfig) -> float:
    """High-accuracy optimum estimate for gap measurements.

    Runs the adaptive fast method with the degree-2 trace preconditioner for
    ten times the experiment budget at a tight residual tolerance and keeps
    the best value seen (the accelerated method is not monotone).
    """
    obj = build_problem(config)
    budget = config.reference_iters or 10 * config.max_iters
    degree = min(2, obj.n - 1)
    prec = build_from_descriptor(f"sympoly:{degree}", obj.curvature)
    guess = initial_guess_M(obj, prec, np.zeros(obj.n), 1.0)
    run = run_adaptive_fgm(
        obj,
        prec,
        SolverConfig(max_iters=budget, initial_guess=guess.value, tol=1e-12),
    )
    return float(min(r.f_value for r in run.records))


def _execute(config: ExperimentConfig, obj: CompositeObjective, f_star: float) -> RunResult:
    solver_config = SolverConfig(
        max_iters=config.max_iters,
        gap_target=config.tol,
        f_star=f_star if config.tol is not None else None,
    )
    if config.method == "krylov":
        return run_krylov_gm(obj, solver_config, config.tau)
    prec = build_from_descriptor(config.precond, obj.curvature)
    if config.method in ("gm", "fgm"):
        bounds = compute_alpha_beta(prec, obj.curvature)
        solver_config.step_constant = bounds.beta * obj.L
        if config.method == "fgm":
            solver_config.rho = bounds.alpha * obj.mu
            return run_fgm(obj, prec, solver_config)
        return run_gm(obj, prec, solver_config)
    guess = initial_guess_M(obj, prec, np.zeros(obj.n), 1.0)
    solver_config.initial_guess = guess.value
    if config.method == "adaptive-gm":
        return run_adaptive_gm(obj, prec, solver_config)
    return run_adaptive_fgm(obj, prec, solver_config)


def write_run_csv(path, run: RunResult, f_star: float):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        for r in run.records:
            writer.writerow(
                [
                    r.k,
                    repr(float(r.f_value)),
                    repr(float(r.f_value - f_star)),
                    r.matvecs,
                    r.grad_evals,
                    r.ls_trials,
                    repr(float(r.M_k)),
                    repr(float(r.time_ms)),
                ]
            )


def read_run_csv(path) -> dict:
    """Read a run CSV back into arrays keyed by column name."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        columns = {name: [] for name in header}
        for row in reader:
            for name, value in zip(header, row):
                columns[name].append(float(value))
    return {name: np.asarray(values) for name, values in columns.items()}


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute one configured run; writes NAME.csv and NAME.json, returns the summary."""
    config.validate()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    f_star = reference_optimum(config)
    obj = build_problem(config)
    run = _execute(config, obj, f_star)

    csv_path = out_dir / f"{config.name}.csv"
    write_run_csv(csv_path, run, f_star)

    iterations_to_tol = None
    if config.tol is not None:
        for r in run.records:
            if r.f_value - f_star <= config.tol:
                iterations_to_tol = r.k
                break
    summary = {
        "config": asdict(config),
        "iterations": run.iterations,
        "iterations_to_tolerance": iterations_to_tol,
        "total_matvecs": run.total_matvecs(),
        "termination": run.termination,
        "f_star_reference": f_star,
        "final_fval": run.records[-1].f_value,
    }
    with open(out_dir / f"{config.name}.json", "w") as handle:
        json.dump(summary, handle, indent=2)
    return summary


def run_bench(config_paths, out_dir=None) -> list[dict]:
    """Run a batch of config files; each produces its own CSV and summary."""
    summaries = []
    for path in config_paths:
        config = parse_config_file(path)
        if out_dir is not None:
            config.out_dir = str(out_dir)
        summaries.append(run_experiment(config))
    return summaries


def merge_plotdata(run_dir, out_path) -> int:
    """Merge every run CSV in a directory into one long-format table.

    Adds run/method/precond columns from the JSON summaries so the result
    plots directly; returns the number of runs merged.
    """
    run_dir = Path(run_dir)
    merged = 0
    with open(out_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["run", "method", "precond"] + CSV_HEADER)
        for summary_path in sorted(run_dir.glob("*.json")):
            with open(summary_path) as sh:
                summary = json.load(sh)
            config = summary.get("config", {})
            name = config.get("name", summary_path.stem)
            csv_path = run_dir / f"{name}.csv"
            if not csv_path.exists():
                continue
            with open(csv_path, newline="") as ch:
                reader = csv.reader(ch)
                next(reader)
                for row in reader:
                    writer.writerow(
                        [name, config.get("method", ""), config.get("precond", "")] + row
                    )
            merged += 1
    return merged
