"""Two-stage grid search for the penalty multipliers.

Each grid point is scored by a short simulated-annealing run on the
compiled QUBO: the best read is decoded and checked against the
constrained model, giving (objective, violation count).  Stage one scans a
logarithmic grid to fix the decade of every multiplier; stage two scans a
linear grid over the decade ending at the stage-one winner.  The answer is
the zero-violation point with the lowest objective, ties going to the
lexicographically smallest multiplier vector.

Small multipliers sit close to the edge where infeasible states become
cheaper than feasible ones, and a short run can miss those states (energy
gaps well below the smallest coefficient are common once the surplus
weights are real-valued).  So the ranked candidates are verified and the
first one whose verified optimum is violation free, and no worse than its
grid score, is returned.  Verification is an exhaustive QUBO solve when
the instance is small enough to enumerate, otherwise a longer SA run.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .models import PartitionModel, PartitionQubo, PenaltyWeights, compile_qubo_plain, compile_qubo_sharing
from .solvers import AnnealSchedule, SizeGuardError, simulated_annealing, solve_exhaustive_qubo

__all__ = ["GridSpec", "GridPoint", "TuningResult", "TuningError", "evaluate_grid_point", "grid_search_two_stage"]

AXES = ("lambda_oh", "lambda_bc", "lambda_aux")
VERIFY_MODES = ("auto", "exhaustive", "sa", "none")


@dataclass(frozen=True)
class GridSpec:
    """Grid geometry and the SA budget spent on each point.

    Exponent ranges are inclusive decades, e.g. ``(-3, 3)`` scans
    ``1e-3 .. 1e3``.
    """

    oh_exponents: tuple[int, int] = (-3, 3)
    bc_exponents: tuple[int, int] = (-3, 3)
    aux_exponents: tuple[int, int] = (-3, 3)
    points_per_decade: int = 1
    linear_points: int = 10
    reads: int = 20
    sweeps: int = 200
    verify_reads: int = 100
    verify_sweeps: int = 2000
    K: int = 10
    seed: int = 0
    verify: str = "auto"

    def __post_init__(self):
        if self.verify not in VERIFY_MODES:
            raise ValueError(f"verify must be one of {VERIFY_MODES}")
        for lo, hi in (self.oh_exponents, self.bc_exponents, self.aux_exponents):
            if lo > hi:
                raise ValueError("empty exponent range")
        if self.points_per_decade < 1 or self.linear_points < 1:
            raise ValueError("grid densities must be >= 1")
        if min(self.reads, self.sweeps, self.verify_reads, self.verify_sweeps) < 1:
            raise ValueError("the SA budget needs at least one read and one sweep")

    def log_axis(self, axis: str) -> np.ndarray:
        lo, hi = {"lambda_oh": self.oh_exponents, "lambda_bc": self.bc_exponents, "lambda_aux": self.aux_exponents}[axis]
        count = (hi - lo) * self.points_per_decade + 1
        return np.logspace(lo, hi, count)

    def linear_axis(self, winner: float) -> np.ndarray:
        return np.linspace(winner / 10.0, winner, self.linear_points)

    @property
    def schedule(self) -> AnnealSchedule:
        return AnnealSchedule(reads=self.reads, sweeps=self.sweeps, seed=self.seed)

    @property
    def verify_schedule(self) -> AnnealSchedule:
        return AnnealSchedule(reads=self.verify_reads, sweeps=self.verify_sweeps, seed=self.seed + 1)


@dataclass(frozen=True)
class GridPoint:
    stage: str
    lambdas: tuple
    objective: Optional[float]
    violations: int

    def key(self):
        return (self.objective, self.lambdas)


@dataclass
class TuningResult:
    weights: PenaltyWeights
    trace: list = field(default_factory=list)

    def write_trace(self, path) -> None:
        names = ["lambda_oh", "lambda_bc", "lambda_aux"][: len(self.trace[0].lambdas)] if self.trace else ["lambda_oh", "lambda_bc"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*names, "objective", "violations", "stage"])
            for pt in self.trace:
                w.writerow([*(repr(float(x)) for x in pt.lambdas), "" if pt.objective is None else repr(pt.objective), pt.violations, pt.stage])


class TuningError(RuntimeError):
    """No grid point produced a solution without violations."""

    def __init__(self, message, best: GridPoint | None = None, trace=None):
        super().__init__(message)
        self.best = best
        self.trace = trace or []


def _weights(lambdas, K, sharing) -> PenaltyWeights:
    if sharing:
        return PenaltyWeights(lambdas[0], lambdas[1], lambdas[2], K=K)
    return PenaltyWeights(lambdas[0], lambdas[1], K=K)


def evaluate_grid_point(model, weights: PenaltyWeights, budget: AnnealSchedule, sharing: bool = False) -> tuple[Optional[float], int]:
    """Compile, anneal with ``budget`` and score the lowest-energy read.

    ``model`` is a :class:`PartitionModel` or an already compiled
    :class:`PartitionQubo` (which is reweighted, not recompiled).
    """
    if isinstance(model, PartitionQubo):
        problem = model.reweighted(weights)
    else:
        problem = (compile_qubo_sharing if sharing else compile_qubo_plain)(model, weights)
    rep = simulated_annealing(problem, budget)
    return rep.objective, rep.violations


def _winner(points: list[GridPoint]) -> Optional[GridPoint]:
    ok = [p for p in points if p.violations == 0]
    return min(ok, key=GridPoint.key) if ok else None


def _least_bad(points: list[GridPoint]) -> GridPoint:
    return min(points, key=lambda p: (p.violations, p.objective, p.lambdas))


def grid_search_two_stage(model: PartitionModel, spec: GridSpec | None = None, sharing: bool = False) -> TuningResult:
    """Tune ``lambda_oh``, ``lambda_bc`` (and ``lambda_aux`` when ``sharing``).

    Raises :class:`TuningError` carrying the least-violating point when no
    point on either grid is violation free.
    """
    spec = spec or GridSpec()
    axes = AXES if sharing else AXES[:2]
    compiled = (compile_qubo_sharing if sharing else compile_qubo_plain)(model, _weights([1.0] * len(axes), spec.K, sharing))
    budget = spec.schedule
    trace: list[GridPoint] = []

    def scan(stage, grids):
        pts = []
        for lambdas in itertools.product(*grids):
            lambdas = tuple(float(x) for x in lambdas)
            obj, viol = evaluate_grid_point(compiled, _weights(lambdas, spec.K, sharing), budget)
            pts.append(GridPoint(stage, lambdas, obj, viol))
        trace.extend(pts)
        return pts

    stage1 = scan("log", [spec.log_axis(a) for a in axes])
    anchor = _winner(stage1) or _least_bad(stage1)
    stage2 = scan("linear", [spec.linear_axis(x) for x in anchor.lambdas])
    candidates = sorted({p.lambdas: p for p in stage1 + stage2 if p.violations == 0}.values(), key=GridPoint.key)
    if not candidates:
        raise TuningError("no violation-free grid point found", _least_bad(stage1 + stage2), trace)
    if spec.verify == "none":
        return TuningResult(_weights(candidates[0].lambdas, spec.K, sharing), trace)
    for cand in candidates:
        weights = _weights(cand.lambdas, spec.K, sharing)
        obj, viol = _verify(compiled, weights, spec)
        trace.append(GridPoint("verify", cand.lambdas, obj, viol))
        if viol == 0 and obj <= cand.objective:
            return TuningResult(weights, trace)
    raise TuningError("every candidate failed verification", _least_bad(trace), trace)


def _verify(compiled: PartitionQubo, weights: PenaltyWeights, spec: GridSpec):
    if spec.verify in ("auto", "exhaustive"):
        try:
            rep = solve_exhaustive_qubo(compiled.reweighted(weights))
            return rep.objective, rep.violations
        except SizeGuardError:
            if spec.verify == "exhaustive":
                raise
    return evaluate_grid_point(compiled, weights, spec.verify_schedule)
