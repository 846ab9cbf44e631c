"""Exact oracles and local-search heuristics for partition problems.

All heuristics are sequences of independent restarts ("reads").  Read ``r``
draws from a random stream derived from ``(seed, r)`` only, so results do
not depend on how many reads fit in a time budget: a longer budget sees a
superset of the reads of a shorter one.  When a time limit cuts a read
short it is dropped, unless it is the only one.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import _kernels as K
from .models import (
    PartitionModel,
    PartitionQubo,
    SolveReport,
    _label_chunks,
    cqm_batch,
    evaluate_cqm,
)
from .qubo import Qubo

__all__ = [
    "SizeGuardError",
    "ENUMERATION_LIMIT",
    "AnnealSchedule",
    "SampleSet",
    "default_beta_range",
    "solve_exhaustive_cqm",
    "solve_exhaustive_qubo",
    "simulated_annealing",
    "tabu_search",
    "parallel_tempering",
    "SOLVERS",
]

ENUMERATION_LIMIT = 10**7


class SizeGuardError(ValueError):
    """Problem too large for exhaustive enumeration."""


Problem = Union[Qubo, PartitionQubo]


@dataclass(frozen=True)
class AnnealSchedule:
    """Simulated-annealing run parameters.

    ``reads=None`` means "as many reads as fit in ``time_limit``".
    ``beta_range=None`` picks :func:`default_beta_range`.
    """

    reads: Optional[int] = 100
    sweeps: int = 1000
    beta_range: Optional[tuple[float, float]] = None
    seed: int = 0
    time_limit: Optional[float] = None

    def __post_init__(self):
        if self.reads is None and self.time_limit is None:
            raise ValueError("unbounded reads need a time limit")
        if self.reads is not None and self.reads < 1:
            raise ValueError("reads must be >= 1")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.beta_range is not None:
            b0, b1 = self.beta_range
            if not (0 < b0 <= b1):
                raise ValueError("beta range must satisfy 0 < beta_start <= beta_end")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time limit must be positive")


@dataclass
class SampleSet:
    states: np.ndarray
    energies: np.ndarray
    truncated: bool = False
    wall_time: float = 0.0
    trace: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.energies)


def _unpack(problem: Problem) -> tuple[Qubo, Optional[PartitionQubo]]:
    if isinstance(problem, PartitionQubo):
        return problem.qubo, problem
    return problem, None


def default_beta_range(qubo: Qubo) -> tuple[float, float]:
    """``(0.1 / mean|coef|, 10 / min nonzero |coef|)``."""
    mags = qubo.coefficient_magnitudes()
    if len(mags) == 0:
        return (1.0, 1.0)
    return (0.1 / float(mags.mean()), 10.0 / float(mags.min()))


def _read_seed(seed: int, read: int) -> int:
    return int(np.random.SeedSequence([seed, read]).generate_state(1, np.uint32)[0])


def _csr(qubo: Qubo):
    A = qubo.adjacency()
    return (
        np.ascontiguousarray(qubo.linear, dtype=np.float64),
        A.indptr.astype(np.int64),
        A.indices.astype(np.int64),
        A.data.astype(np.float64),
    )


def _chunk_size(qubo: Qubo, replicas: int = 1) -> int:
    """Sweeps per kernel call so a time check happens roughly every millisecond."""
    work = replicas * (qubo.num_variables + 2 * qubo.num_interactions) + 1
    return max(1, 200_000 // work)


def _run_reads(
    qubo: Qubo,
    one_read: Callable[[int, Optional[float]], tuple[np.ndarray, bool]],
    reads: Optional[int],
    seed: int,
    time_limit: Optional[float],
) -> SampleSet:
    start = time.perf_counter()
    deadline = None if time_limit is None else start + time_limit
    states, trace = [], []
    truncated = False
    best = math.inf
    r = 0
    while reads is None or r < reads:
        if deadline is not None and states and time.perf_counter() >= deadline:
            truncated = True
            break
        state, done = one_read(_read_seed(seed, r), deadline)
        if not done:
            truncated = True
            if not states:
                states.append(state)
            break
        states.append(state)
        e = qubo.evaluate(state)
        if e < best:
            best = e
            trace.append((time.perf_counter() - start, e))
        r += 1
    S = np.array(states, dtype=np.int8).reshape(len(states), qubo.num_variables)
    return SampleSet(S, qubo.energies(S), truncated, time.perf_counter() - start, trace)


def _select(samples: SampleSet, qubo: Qubo, problem: Optional[PartitionQubo], solver: str, select: str) -> SolveReport:
    extra = dict(wall_time=samples.wall_time, truncated=samples.truncated, samples=samples)
    if problem is None or select == "energy":
        i = int(np.argmin(samples.energies))
        if problem is None:
            return SolveReport(solver, samples.states[i].copy(), None, energy=float(samples.energies[i]), **extra)
        return problem.report(samples.states[i], solver, **extra)
    if select != "objective":
        raise ValueError(f"unknown selection rule {select!r}")
    uniq, first = np.unique(samples.states, axis=0, return_index=True)
    best_key, best_report = None, None
    for state, idx in zip(uniq, first):
        rep = problem.report(state, solver, **extra)
        key = (rep.violations, rep.objective, rep.energy, idx)
        if best_key is None or key < best_key:
            best_key, best_report = key, rep
    return best_report


# ---- exhaustive oracles --------------------------------------------------------


def solve_exhaustive_cqm(model: PartitionModel) -> SolveReport:
    """Enumerate all ``P**N`` one-hot assignments; keep the best feasible one."""
    total = model.P**model.N
    if total > ENUMERATION_LIMIT:
        raise SizeGuardError(f"P**N = {total} exceeds the enumeration limit {ENUMERATION_LIMIT}")
    start = time.perf_counter()
    best_obj, best_labels = math.inf, None
    for labels in _label_chunks(model.N, model.P):
        obj, feasible = cqm_batch(model, labels)
        if not feasible.any():
            continue
        obj = np.where(feasible, obj, np.inf)
        i = int(np.argmin(obj))
        if obj[i] < best_obj:
            best_obj, best_labels = obj[i], labels[i].copy()
    wall = time.perf_counter() - start
    if best_labels is None:
        return SolveReport("exhaustive-cqm", None, None, status="infeasible", wall_time=wall)
    v = np.zeros((model.N, model.P), dtype=np.int8)
    v[np.arange(model.N), best_labels] = 1
    ev = evaluate_cqm(model, v)
    return SolveReport(
        "exhaustive-cqm",
        v.reshape(-1),
        ev.objective,
        ev.one_hot_violations,
        ev.balancing_violations,
        loads=ev.loads,
        wall_time=wall,
        partition=[int(p) for p in best_labels],
    )


def solve_exhaustive_qubo(problem: Problem, slack_closed_form: bool = True, chunk: int = 1 << 15) -> SolveReport:
    """Global QUBO minimiser by enumeration.

    With ``slack_closed_form`` and a compiled partition problem, only the
    non-slack bits are enumerated; each balancing block's slack bits are set
    to the rounded, clamped scaled residual, which is optimal because no
    other term touches them.
    """
    qubo, part = _unpack(problem)
    n = qubo.num_variables
    blocks = part.slack_blocks if (part is not None and slack_closed_form) else ()
    slack = np.concatenate([b.slack for b in blocks]) if blocks else np.zeros(0, dtype=np.int64)
    free = np.setdiff1d(np.arange(n), slack)
    if 2 ** len(free) > ENUMERATION_LIMIT:
        raise SizeGuardError(
            f"2**{len(free)} assignments exceed the enumeration limit {ENUMERATION_LIMIT}"
        )
    start = time.perf_counter()
    total = 1 << len(free)
    shifts = np.arange(len(free), dtype=np.int64)
    best_e, best_x = math.inf, None
    for lo in range(0, total, chunk):
        codes = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        X = np.zeros((len(codes), n), dtype=np.int8)
        X[:, free] = (codes[:, None] >> shifts[None, :]) & 1
        for b in blocks:
            b.fill(X)
        E = qubo.energies(X)
        i = int(np.argmin(E))
        if E[i] < best_e:
            best_e, best_x = float(E[i]), X[i].copy()
    samples = SampleSet(best_x[None, :], np.array([best_e]), wall_time=time.perf_counter() - start)
    return _select(samples, qubo, part, "exhaustive-qubo", "energy")


# ---- simulated annealing -------------------------------------------------------


def simulated_annealing(problem: Problem, schedule: AnnealSchedule | None = None, select: str = "energy") -> SolveReport:
    """Single-bit-flip Metropolis annealing over a geometric inverse-temperature ladder.

    Each read starts from a uniformly random state and returns the best
    state seen at the end of any sweep.  ``select`` chooses among reads:
    ``"energy"`` takes the lowest QUBO energy, ``"objective"`` prefers
    fewest violations, then lowest objective.
    """
    schedule = schedule or AnnealSchedule()
    qubo, part = _unpack(problem)
    h, indptr, indices, data = _csr(qubo)
    b0, b1 = schedule.beta_range or default_beta_range(qubo)
    betas = np.geomspace(b0, b1, schedule.sweeps)
    step = _chunk_size(qubo)

    def one_read(seed, deadline):
        K.seed_stream(seed)
        state = K.random_bits(len(h))
        fld, energy = K.fields_and_energy(h, indptr, indices, data, state)
        best_state = state.copy()
        best = np.array([energy])
        for s in range(0, schedule.sweeps, step):
            if deadline is not None and time.perf_counter() >= deadline:
                return best_state, False
            energy = K.metropolis_sweeps(h, indptr, indices, data, state, fld, energy, betas[s:s + step], best_state, best)
        return best_state, True

    if schedule.time_limit is None:
        start = time.perf_counter()
        seeds = np.array([_read_seed(schedule.seed, r) for r in range(schedule.reads)], dtype=np.int64)
        S = K.anneal_reads(h, indptr, indices, data, betas, seeds)
        samples = SampleSet(S, qubo.energies(S), False, time.perf_counter() - start)
    else:
        samples = _run_reads(qubo, one_read, schedule.reads, schedule.seed, schedule.time_limit)
    rep = _select(samples, qubo, part, "sa", select)
    rep.metadata.update(beta_range=(b0, b1), sweeps=schedule.sweeps, reads=len(samples), seed=schedule.seed)
    return rep


# ---- tabu search ---------------------------------------------------------------


def tabu_search(
    problem: Problem,
    iterations: int | None = None,
    tabu_tenure: int | None = None,
    seed: int = 0,
    time_limit: float | None = None,
    restarts: int | None = 1,
    select: str = "energy",
) -> SolveReport:
    """Steepest-descent tabu search with recency tabu list and aspiration.

    Defaults: ``iterations = 20 * n`` and ``tabu_tenure = min(20, n // 4)``.
    ``restarts=None`` keeps restarting from fresh random states until
    ``time_limit``.
    """
    qubo, part = _unpack(problem)
    h, indptr, indices, data = _csr(qubo)
    n = len(h)
    iterations = 20 * n if iterations is None else iterations
    tenure = min(20, n // 4) if tabu_tenure is None else tabu_tenure
    if iterations < 1 or tenure < 0:
        raise ValueError("iterations must be >= 1 and tenure >= 0")
    step = max(1, 200_000 // (n + 1))

    def one_read(rseed, deadline):
        K.seed_stream(rseed)
        state = K.random_bits(n)
        fld, energy = K.fields_and_energy(h, indptr, indices, data, state)
        best_state = state.copy()
        best = np.array([energy])
        tabu_until = np.zeros(n, dtype=np.int64)
        for it in range(0, iterations, step):
            if deadline is not None and time.perf_counter() >= deadline:
                return best_state, False
            energy = K.tabu_moves(h, indptr, indices, data, state, fld, energy, tenure, tabu_until, it, min(step, iterations - it), best_state, best)
        return best_state, True

    samples = _run_reads(qubo, one_read, restarts, seed, time_limit)
    rep = _select(samples, qubo, part, "tabu", select)
    rep.metadata.update(iterations=iterations, tabu_tenure=tenure, restarts=len(samples), seed=seed)
    return rep


# ---- parallel tempering --------------------------------------------------------


def parallel_tempering(
    problem: Problem,
    replicas: int = 8,
    betas=None,
    sweeps: int = 1000,
    swap_interval: int = 1,
    seed: int = 0,
    time_limit: float | None = None,
    restarts: int | None = 1,
    select: str = "energy",
) -> SolveReport:
    """Replica-exchange Monte Carlo over an increasing inverse-temperature ladder.

    ``betas`` defaults to a geometric ladder spanning
    :func:`default_beta_range` with ``replicas`` rungs.
    """
    qubo, part = _unpack(problem)
    h, indptr, indices, data = _csr(qubo)
    n = len(h)
    if betas is None:
        if replicas < 2:
            raise ValueError("parallel tempering needs at least 2 replicas")
        b0, b1 = default_beta_range(qubo)
        if b1 == b0:
            b1 = b0 * 10.0
        betas = np.geomspace(b0, b1, replicas)
    betas = np.asarray(betas, dtype=float)
    if len(betas) < 2:
        raise ValueError("parallel tempering needs at least 2 replicas")
    if not (np.all(betas > 0) and np.all(np.diff(betas) > 0)):
        raise ValueError("inverse-temperature ladder must be positive and strictly increasing")
    if sweeps < 1 or swap_interval < 1:
        raise ValueError("sweeps and swap_interval must be >= 1")
    R = len(betas)
    step = _chunk_size(qubo, R)

    def one_read(rseed, deadline):
        K.seed_stream(rseed)
        states = np.empty((R, n), dtype=np.int8)
        fields = np.empty((R, n))
        energies = np.empty(R)
        for r in range(R):
            states[r] = K.random_bits(n)
            fields[r], energies[r] = K.fields_and_energy(h, indptr, indices, data, states[r])
        i = int(np.argmin(energies))
        best_state = states[i].copy()
        best = np.array([energies[i]])
        counter = np.zeros(1, dtype=np.int64)
        for s in range(0, sweeps, step):
            if deadline is not None and time.perf_counter() >= deadline:
                return best_state, False
            K.tempering_sweeps(h, indptr, indices, data, states, fields, energies, betas, min(step, sweeps - s), swap_interval, counter, best_state, best)
        return best_state, True

    samples = _run_reads(qubo, one_read, restarts, seed, time_limit)
    rep = _select(samples, qubo, part, "pt", select)
    rep.metadata.update(betas=betas.tolist(), sweeps=sweeps, swap_interval=swap_interval, restarts=len(samples), seed=seed)
    return rep


SOLVERS = ("exhaustive-cqm", "exhaustive-qubo", "sa", "tabu", "pt")
