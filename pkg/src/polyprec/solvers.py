"""Fixed-step and adaptive first-order methods with preconditioning.

All methods share the telemetry contract: per-iteration records of objective
value, gradient-map norm, cumulative matvec and oracle counts, line-search
trials, and the accumulation weights of the accelerated scheme. Runs are
deterministic; nothing here draws randomness.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .preconditioners import Preconditioner
from .problems import CompositeObjective, gradient_step_with_norm

__all__ = [
    "SolverConfig",
    "FGMState",
    "IterationRecord",
    "RunResult",
    "InitialGuess",
    "solve_coefficient_equation",
    "quadratic_growth_predicate",
    "initial_guess_M",
    "fgm_step",
    "run_gm",
    "run_fgm",
    "run_adaptive_gm",
    "run_adaptive_fgm",
]

GROWTH_FACTOR = 2.0
SHRINK_FACTOR = 2.0


@dataclass
class SolverConfig:
    """Knobs shared by all runs.

    ``step_constant`` is the fixed M of the non-adaptive methods;
    ``initial_guess`` seeds the adaptive search. Stopping: optimality gap
    against a known ``f_star``, gradient-map norm below ``tol``, or the
    iteration cap; the first satisfied rule wins.
    """

    max_iters: int = 1000
    step_constant: float | None = None
    initial_guess: float | None = None
    rho: float = 0.0
    tol: float = 0.0
    gap_target: float | None = None
    f_star: float | None = None
    max_doublings: int = 60
    keep_iterates: bool = False
    x0: np.ndarray | None = None

    def start_point(self, n: int) -> np.ndarray:
        if self.x0 is None:
            return np.zeros(n)
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (n,):
            raise ValueError(f"x0 shape {x0.shape} does not match dimension {n}")
        return x0.copy()


@dataclass(frozen=True)
class FGMState:
    """Accelerated-method state: main iterate, prox center, accumulated weight."""

    x: np.ndarray
    v: np.ndarray
    A: float
    k: int = 0


@dataclass
class IterationRecord:
    k: int
    f_value: float
    grad_map: float
    matvecs: int
    f_evals: int
    grad_evals: int
    ls_trials: int
    M_k: float
    A_k: float
    time_ms: float
    eff_degree: int | None = None


@dataclass
class RunResult:
    method: str
    records: list[IterationRecord]
    x: np.ndarray
    termination: str
    iterates_x: list[np.ndarray] | None = None
    iterates_v: list[np.ndarray] | None = None

    @property
    def iterations(self) -> int:
        return self.records[-1].k

    def f_values(self) -> np.ndarray:
        return np.array([r.f_value for r in self.records])

    def total_matvecs(self) -> int:
        return self.records[-1].matvecs

    def total_ls_trials(self) -> int:
        return sum(r.ls_trials for r in self.records)


class _Telemetry:
    """Cumulative counters relative to the start of one run."""

    def __init__(self, obj: CompositeObjective):
        self.obj = obj
        self.op = obj.curvature
        self._mv0 = self.op.matvecs
        self._f0 = obj.f_evals
        self._g0 = obj.grad_evals
        self._t0 = time.perf_counter()
        self.records: list[IterationRecord] = []

    def record(self, k, f_value, grad_map, ls_trials, M_k, A_k, eff_degree=None):
        self.records.append(
            IterationRecord(
                k=k,
                f_value=f_value,
                grad_map=grad_map,
                matvecs=self.op.matvecs - self._mv0,
                f_evals=self.obj.f_evals - self._f0,
                grad_evals=self.obj.grad_evals - self._g0,
                ls_trials=ls_trials,
                M_k=M_k,
                A_k=A_k,
                time_ms=(time.perf_counter() - self._t0) * 1e3,
                eff_degree=eff_degree,
            )
        )


def _check_finite(value: float, method: str):
    if not np.isfinite(value):
        raise RuntimeError(
            f"{method}: objective became non-finite (step constant too small "
            "for a fixed-step run, or the problem is unbounded)"
        )


def _gap_reached(config: SolverConfig, f_value: float) -> bool:
    return (
        config.gap_target is not None
        and config.f_star is not None
        and f_value - config.f_star <= config.gap_target
    )


def solve_coefficient_equation(M: float, rho: float, A: float) -> float:
    """Positive root of the accumulation-weight equation of the fast method.

    Solves ``M a^2 / (A + a) = 1 + rho (A + a)`` for a > 0 via the expanded
    quadratic ``(M - rho) a^2 - (1 + 2 rho A) a - (A + rho A^2) = 0``. Both
    terms of the root formula are nonnegative, so there is no cancellation.
    """
    if not M > rho:
        raise ValueError(f"need M > rho, got M={M}, rho={rho}")
    if rho < 0 or A < 0:
        raise ValueError("rho and A must be nonnegative")
    b = 1.0 + 2.0 * rho * A
    c = A + rho * A * A
    lead = M - rho
    return float((b + np.sqrt(b * b + 4.0 * lead * c)) / (2.0 * lead))


def quadratic_growth_predicate(
    M: float,
    prec: Preconditioner,
    x: np.ndarray,
    y: np.ndarray,
    obj: CompositeObjective,
    g: np.ndarray | None = None,
    step_norm_sq: float | None = None,
) -> bool:
    """Whether the quadratic model at x with constant M dominates f at y.

    When y is the closed-form preconditioned step from x with this same M,
    the quadratic term equals ``<g, x - y> / 2`` and no metric inversion is
    needed; oracle-produced steps must pass their own ``step_norm_sq``.
    """
    if g is None:
        g = obj.gradient(x)
    if step_norm_sq is None:
        quad = 0.5 * float(g @ (x - y))
    else:
        quad = 0.5 * M * step_norm_sq
    return obj.value(y) <= obj.value(x) + float(g @ (y - x)) + quad


@dataclass(frozen=True)
class InitialGuess:
    """Result of the trial-step recipe for seeding the adaptive search."""

    value: float
    flagged: bool = False
    note: str = ""


def initial_guess_M(
    obj: CompositeObjective,
    prec: Preconditioner,
    x0: np.ndarray,
    M0_prime: float,
) -> InitialGuess:
    """Curvature estimate along one trial step; never exceeds the true constant.

    Degenerate cases are flagged: a stationary start returns the trial
    constant unchanged, and zero curvature along the step falls back to a
    small fraction of it.
    """
    if M0_prime <= 0:
        raise ValueError("trial step constant must be positive")
    x0 = np.asarray(x0, dtype=float)
    g0 = obj.gradient(x0)
    x1, step_norm_sq = gradient_step_with_norm(
        M0_prime, prec, obj.curvature, x0, g0, obj.psi
    )
    if step_norm_sq <= 1e-300:
        return InitialGuess(M0_prime, flagged=True, note="stationary start")
    bregman = obj.value(x1) - obj.value(x0) - float(g0 @ (x1 - x0))
    estimate = bregman / (0.5 * step_norm_sq)
    if not np.isfinite(estimate) or estimate <= 0:
        return InitialGuess(
            M0_prime * 2.0**-6, flagged=True, note="no curvature along trial step"
        )
    return InitialGuess(estimate)


def run_gm(
    obj: CompositeObjective, prec: Preconditioner, config: SolverConfig
) -> RunResult:
    """Fixed-step preconditioned gradient method."""
    if config.step_constant is None or config.step_constant <= 0:
        raise ValueError("fixed-step run requires a positive step_constant")
    M = config.step_constant
    op = obj.curvature
    x = config.start_point(obj.n)
    tele = _Telemetry(obj)
    iterates = [x.copy()] if config.keep_iterates else None
    f_value = obj.full_value(x)
    tele.record(0, f_value, np.inf, 0, M, 0.0)
    termination = "max_iters"
    for k in range(config.max_iters):
        if _gap_reached(config, f_value):
            termination = "gap_target"
            break
        g = obj.gradient(x)
        y, step_norm_sq = gradient_step_with_norm(M, prec, op, x, g, obj.psi)
        grad_map = M * np.sqrt(max(step_norm_sq, 0.0))
        x = y
        f_value = obj.full_value(x)
        _check_finite(f_value, "run_gm")
        if iterates is not None:
            iterates.append(x.copy())
        tele.record(k + 1, f_value, grad_map, 0, M, 0.0)
        if config.tol > 0 and grad_map <= config.tol:
            termination = "grad_map_tol"
            break
    return RunResult("gm", tele.records, x, termination, iterates_x=iterates)


def fgm_step(
    obj: CompositeObjective,
    prec: Preconditioner,
    M: float,
    rho: float,
    state: FGMState,
):
    """One step of the fast method for a given constant M.

    Returns ``(new_state, y, g_y, step_sq)`` where ``step_sq`` is the squared
    distance between the new iterate and the interpolation point y in the
    inverse-preconditioner metric; it scales the prox step norm by the
    interpolation weight, so it stays exact for composite steps and feeds the
    adaptive predicate.
    """
    op = obj.curvature
    a = solve_coefficient_equation(M, rho, state.A)
    A_new = state.A + a
    H = (1.0 + rho * A_new) / a
    theta = a / A_new
    omega = rho / H
    gamma = omega * (1.0 - theta) / (1.0 - omega * theta)
    v_hat = (1.0 - gamma) * state.v + gamma * state.x
    y = (1.0 - theta) * state.x + theta * v_hat
    g_y = obj.gradient(y)
    v_new, prox_sq = gradient_step_with_norm(H, prec, op, v_hat, g_y, obj.psi)
    x_new = (1.0 - theta) * state.x + theta * v_new
    step_sq = theta * theta * prox_sq  # x_new - y = theta * (v_new - v_hat)
    new_state = FGMState(x=x_new, v=v_new, A=A_new, k=state.k + 1)
    return new_state, y, g_y, step_sq


def run_fgm(
    obj: CompositeObjective, prec: Preconditioner, config: SolverConfig
) -> RunResult:
    """Fixed-step preconditioned fast gradient method."""
    if config.step_constant is None or config.step_constant <= 0:
        raise ValueError("fixed-step run requires a positive step_constant")
    M = config.step_constant
    rho = config.rho
    x0 = config.start_point(obj.n)
    state = FGMState(x=x0, v=x0.copy(), A=0.0)
    tele = _Telemetry(obj)
    xs = [x0.copy()] if config.keep_iterates else None
    vs = [x0.copy()] if config.keep_iterates else None
    f_value = obj.full_value(state.x)
    tele.record(0, f_value, np.inf, 0, M, 0.0)
    termination = "max_iters"
    for k in range(config.max_iters):
        if _gap_reached(config, f_value):
            termination = "gap_target"
            break
        state, _, _, step_sq = fgm_step(obj, prec, M, rho, state)
        grad_map = M * np.sqrt(max(step_sq, 0.0))
        f_value = obj.full_value(state.x)
        _check_finite(f_value, "run_fgm")
        if xs is not None:
            xs.append(state.x.copy())
            vs.append(state.v.copy())
        tele.record(k + 1, f_value, grad_map, 0, M, state.A)
        if config.tol > 0 and grad_map <= config.tol:
            termination = "grad_map_tol"
            break
    return RunResult("fgm", tele.records, state.x, termination, iterates_x=xs, iterates_v=vs)


def run_adaptive_gm(
    obj: CompositeObjective, prec: Preconditioner, config: SolverConfig
) -> RunResult:
    """Gradient method with doubling search on the step constant.

    Each iteration doubles the working constant until the quadratic-growth
    predicate accepts, then halves the starting guess for the next iteration.
    With no composite part the preconditioned gradient is computed once per
    iteration, so rejected trials cost one objective evaluation each.
    """
    if config.initial_guess is None or config.initial_guess <= 0:
        raise ValueError("adaptive run requires a positive initial_guess")
    op = obj.curvature
    x = config.start_point(obj.n)
    M_tilde = config.initial_guess
    tele = _Telemetry(obj)
    iterates = [x.copy()] if config.keep_iterates else None
    f_value = obj.full_value(x)
    tele.record(0, f_value, np.inf, 0, M_tilde, 0.0)
    termination = "max_iters"
    for k in range(config.max_iters):
        if _gap_reached(config, f_value):
            termination = "gap_target"
            break
        f_x = obj.value(x)
        g = obj.gradient(x)
        pg = prec.apply(op, g) if obj.psi.is_zero else None
        g_pg = float(g @ pg) if pg is not None else 0.0
        M = M_tilde
        trials = 0
        while True:
            trials += 1
            if pg is not None:
                y = x - pg / M
                step_norm_sq = g_pg / (M * M)
                accepted = obj.value(y) <= f_x - g_pg / (2.0 * M)
            else:
                y, step_norm_sq = gradient_step_with_norm(M, prec, op, x, g, obj.psi)
                accepted = obj.value(y) <= (
                    f_x + float(g @ (y - x)) + 0.5 * M * step_norm_sq
                )
            if accepted:
                break
            if trials > config.max_doublings:
                raise RuntimeError(
                    "adaptive search exceeded the doubling cap; the objective or "
                    "preconditioner violates the curvature assumption"
                )
            M *= GROWTH_FACTOR
        x = y
        M_tilde = M / SHRINK_FACTOR
        grad_map = M * np.sqrt(max(step_norm_sq, 0.0))
        f_value = obj.full_value(x)
        _check_finite(f_value, "run_adaptive_gm")
        if iterates is not None:
            iterates.append(x.copy())
        tele.record(k + 1, f_value, grad_map, trials, M, 0.0)
        if config.tol > 0 and grad_map <= config.tol:
            termination = "grad_map_tol"
            break
    return RunResult("adaptive-gm", tele.records, x, termination, iterates_x=iterates)


def run_adaptive_fgm(
    obj: CompositeObjective, prec: Preconditioner, config: SolverConfig
) -> RunResult:
    """Fast gradient method with doubling search on the step constant.

    A trial recomputes the entire step (the accumulation weight depends on
    the working constant), tests the predicate at the interpolation point,
    and only an accepted trial advances the state.
    """
    if config.initial_guess is None or config.initial_guess <= 0:
        raise ValueError("adaptive run requires a positive initial_guess")
    rho = config.rho
    x0 = config.start_point(obj.n)
    state = FGMState(x=x0, v=x0.copy(), A=0.0)
    M_tilde = config.initial_guess
    tele = _Telemetry(obj)
    xs = [x0.copy()] if config.keep_iterates else None
    vs = [x0.copy()] if config.keep_iterates else None
    f_value = obj.full_value(state.x)
    tele.record(0, f_value, np.inf, 0, M_tilde, 0.0)
    termination = "max_iters"
    for k in range(config.max_iters):
        if _gap_reached(config, f_value):
            termination = "gap_target"
            break
        M = M_tilde
        trials = 0
        while True:
            trials += 1
            candidate, y, g_y, step_sq = fgm_step(obj, prec, M, rho, state)
            model = (
                obj.value(y)
                + float(g_y @ (candidate.x - y))
                + 0.5 * M * step_sq
            )
            if obj.value(candidate.x) <= model:
                break
            if trials > config.max_doublings:
                raise RuntimeError(
                    "adaptive search exceeded the doubling cap; the objective or "
                    "preconditioner violates the curvature assumption"
                )
            M *= GROWTH_FACTOR
        state = candidate
        M_tilde = M / SHRINK_FACTOR
        grad_map = M * np.sqrt(max(step_sq, 0.0))
        f_value = obj.full_value(state.x)
        _check_finite(f_value, "run_adaptive_fgm")
        if xs is not None:
            xs.append(state.x.copy())
            vs.append(state.v.copy())
        tele.record(k + 1, f_value, grad_map, trials, M, state.A)
        if config.tol > 0 and grad_map <= config.tol:
            termination = "grad_map_tol"
            break
    return RunResult(
        "adaptive-fgm", tele.records, state.x, termination, iterates_x=xs, iterates_v=vs
    )
