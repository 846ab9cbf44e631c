"""Batch experiments: every (P, solver) cell of a comparison, plus the reports.

A run writes into ``config.out``:

* ``results.csv``  one row per cell, ``P,solver,objective,violations,wall_time_s,status``
* ``plot.csv``     ``P,solver,objective`` sorted by P, for objective-vs-P figures
* ``summary.csv`` / ``summary.txt``  rows = P, columns = solvers
* ``records/``     one JSON file per cell (partition, loads, multipliers, parameters)
* ``tune_P{P}.csv`` the tuning trace when multipliers are tuned
* ``metadata.json`` timestamps and library versions

Everything except ``metadata.json`` depends only on the config, so a rerun
with the same master seed gives identical files.  The one caveat is wall
time: set ``record_timing=False`` to leave that column empty.  Time-limited
runs are reproducible only as far as the machine completes the same reads.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import io
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .graph import CliquePairSpec, PowerGraph, Uniform, generate_clique_pair, generate_random_graph, load_network
from .models import (
    PartitionModel,
    PenaltyWeights,
    SolveReport,
    compile_qubo_plain,
    compile_qubo_sharing,
    evaluate_cqm,
)
from .solvers import (
    SOLVERS,
    AnnealSchedule,
    parallel_tempering,
    simulated_annealing,
    solve_exhaustive_cqm,
    solve_exhaustive_qubo,
    tabu_search,
)
from .tuning import GridSpec, TuningError, grid_search_two_stage

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "CellRecord",
    "load_instance",
    "cell_seed",
    "run_experiment",
    "emit_report",
    "RESULT_COLUMNS",
    "PLOT_COLUMNS",
]

RESULT_COLUMNS = ("P", "solver", "objective", "violations", "wall_time_s", "status")
PLOT_COLUMNS = ("P", "solver", "objective")
OBJECTIVE_TOL = 1e-9


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to rerun a comparison.

    Exactly one instance source is used: network CSV files
    (``vertices`` + ``links``), a clique pair of size ``clique_pair`` or a
    random graph ``random = (N, edge_probability)``.  Multipliers come
    from ``lambda_*`` unless ``tune`` is set.
    """

    vertices: Optional[str] = None
    links: Optional[str] = None
    weight_policy: str = "surplus"
    clique_pair: Optional[int] = None
    random: Optional[tuple[int, float]] = None
    alpha: float = 1.0
    beta: float = 10.0
    k: float = 0.5
    partitions: tuple[int, ...] = (2,)
    K: int = 10
    lambda_oh: Optional[float] = None
    lambda_bc: Optional[float] = None
    lambda_aux: Optional[float] = None
    tune: bool = False
    sharing: bool = False
    solvers: tuple[str, ...] = ("sa",)
    time_limit: Optional[float] = None
    reads: int = 100
    sweeps: int = 1000
    out: str = "results"
    seed: int = 0
    record_timing: bool = True
    grid: Optional[GridSpec] = None

    def __post_init__(self):
        sources = [self.vertices is not None or self.links is not None, self.clique_pair is not None, self.random is not None]
        if sum(sources) != 1:
            raise ConfigError("give exactly one instance source: network files, a clique pair or a random graph")
        if sources[0] and (self.vertices is None or self.links is None):
            raise ConfigError("network input needs both a vertices and a links file")
        if self.weight_policy not in ("surplus", "uniform"):
            raise ConfigError("weight_policy must be 'surplus' or 'uniform'")
        if not self.solvers:
            raise ConfigError("at least one solver is required")
        unknown = [s for s in self.solvers if s not in SOLVERS]
        if unknown:
            raise ConfigError(f"unknown solver(s) {unknown}; choose from {SOLVERS}")
        if len(set(self.solvers)) != len(self.solvers):
            raise ConfigError("solver list has duplicates")
        if not self.partitions or min(self.partitions) < 1:
            raise ConfigError("partition counts must be >= 1")
        if self.time_limit is not None and not self.time_limit > 0:
            raise ConfigError("time limit must be positive")
        if self.reads < 1 or self.sweeps < 1:
            raise ConfigError("reads and sweeps must be >= 1")
        if not 1 <= self.K <= 20:
            raise ConfigError("K must lie in 1..20")
        needs_lambdas = any(s != "exhaustive-cqm" for s in self.solvers) and not self.tune
        if needs_lambdas:
            if self.lambda_oh is None or self.lambda_bc is None:
                raise ConfigError("give lambda_oh and lambda_bc or request tuning")
            if self.sharing and self.lambda_aux is None:
                raise ConfigError("the sharing model needs lambda_aux or tuning")

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        """Build from string values, as read from a ``key = value`` file."""
        names = {f.name: f for f in dataclasses.fields(cls)}
        kw = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in names or key == "grid":
                raise ConfigError(f"unknown config key {key!r}")
            if raw is None:
                continue
            try:
                kw[key] = _parse_field(key, raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        return cls(**kw)

    def weights(self) -> Optional[PenaltyWeights]:
        if self.lambda_oh is None or self.lambda_bc is None:
            return None
        return PenaltyWeights(self.lambda_oh, self.lambda_bc, self.lambda_aux or 0.0, K=self.K)

    def grid_spec(self) -> GridSpec:
        g = self.grid or GridSpec()
        return dataclasses.replace(g, K=self.K, seed=self.seed)

    def echo(self) -> dict:
        """Parameters copied into every record."""
        return {"alpha": self.alpha, "beta": self.beta, "k": self.k, "K": self.K, "sharing": self.sharing, "seed": self.seed}


def _truthy(raw: str) -> bool:
    s = str(raw).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def parse_partitions(raw) -> tuple[int, ...]:
    """``"3"``, ``"2-6"`` or ``"2,4,8"``."""
    if isinstance(raw, (list, tuple)):
        return tuple(int(x) for x in raw)
    raw = str(raw).strip()
    if "-" in raw:
        lo, hi = raw.split("-", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(x) for x in raw.split(","))


def _parse_field(key: str, raw):
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(raw, list) else raw
    raw = raw.strip()
    if key in ("alpha", "beta", "k", "lambda_oh", "lambda_bc", "lambda_aux", "time_limit"):
        return float(raw)
    if key in ("K", "reads", "sweeps", "seed", "clique_pair"):
        return int(raw)
    if key in ("tune", "sharing", "record_timing"):
        return _truthy(raw)
    if key == "partitions":
        return parse_partitions(raw)
    if key == "solvers":
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    if key == "random":
        n, p = raw.replace(",", " ").split()
        return (int(n), float(p))
    return raw


def load_instance(config: ExperimentConfig) -> PowerGraph:
    if config.clique_pair is not None:
        return generate_clique_pair(CliquePairSpec(config.clique_pair, k=config.k, seed=config.seed))
    if config.random is not None:
        n, p = config.random
        return generate_random_graph(int(n), float(p), seed=config.seed)
    policy = Uniform(config.seed) if config.weight_policy == "uniform" else "surplus"
    return load_network(config.vertices, config.links, weight_policy=policy)


def cell_seed(master: int, P: int, solver: str) -> int:
    """Seed of one cell; independent of which other cells are in the run."""
    ss = np.random.SeedSequence([master, P, SOLVERS.index(solver)])
    return int(ss.generate_state(1)[0])


@dataclass
class CellRecord:
    P: int
    solver: str
    status: str
    objective: Optional[float] = None
    violations: Optional[int] = None
    one_hot_violations: Optional[int] = None
    balancing_violations: Optional[int] = None
    aux_violations: Optional[int] = None
    wall_time_s: Optional[float] = None
    energy: Optional[float] = None
    partition: Optional[list] = None
    loads: Optional[list] = None
    lambdas: Optional[dict] = None
    error: Optional[str] = None
    metadata: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    graph: Optional[PowerGraph]
    records: list[CellRecord] = field(default_factory=list)
    tuning: dict = field(default_factory=dict)
    started: str = ""
    finished: str = ""

    @property
    def failed(self) -> list[CellRecord]:
        return [r for r in self.records if r.status != "ok"]

    @property
    def exit_code(self) -> int:
        return 2 if self.failed else 0


def _solve(config: ExperimentConfig, model: PartitionModel, problem, solver: str, seed: int) -> SolveReport:
    limited = config.time_limit is not None
    runs = None if limited else config.reads
    if solver == "exhaustive-cqm":
        return solve_exhaustive_cqm(model)
    if solver == "exhaustive-qubo":
        return solve_exhaustive_qubo(problem)
    if solver == "sa":
        schedule = AnnealSchedule(reads=runs, sweeps=config.sweeps, seed=seed, time_limit=config.time_limit)
        return simulated_annealing(problem, schedule, select="objective")
    if solver == "tabu":
        return tabu_search(problem, seed=seed, time_limit=config.time_limit, restarts=runs, select="objective")
    if solver == "pt":
        return parallel_tempering(problem, sweeps=config.sweeps, seed=seed, time_limit=config.time_limit, restarts=runs, select="objective")
    raise ConfigError(f"unknown solver {solver!r}")


def _validated(model: PartitionModel, problem, rep: SolveReport) -> tuple[str, Optional[str]]:
    """Recompute the objective from the decoded assignment."""
    if rep.assignment is None:
        return rep.status if rep.status != "ok" else "failed", "solver returned no assignment"
    n = model.N * model.P
    flows = problem.cqm_flows(rep.assignment) if problem is not None else None
    ev = evaluate_cqm(model, np.asarray(rep.assignment)[:n], flows)
    if rep.objective is None or not math.isclose(ev.objective, rep.objective, rel_tol=0, abs_tol=OBJECTIVE_TOL):
        return "failed", f"objective mismatch: solver {rep.objective} vs recomputed {ev.objective}"
    if ev.one_hot_violations != rep.one_hot_violations or ev.balancing_violations != rep.balancing_violations:
        return "failed", "violation counts disagree with the constrained model"
    return ("ok" if rep.violations == 0 else "infeasible"), None


def _cell(config, model, problem, solver, P, weights) -> CellRecord:
    seed = cell_seed(config.seed, P, solver)
    meta = {**config.echo(), "cell_seed": seed, "time_limit": config.time_limit}
    lambdas = None if weights is None or solver == "exhaustive-cqm" else dataclasses.asdict(weights)
    try:
        rep = _solve(config, model, problem, solver, seed)
    except (ValueError, MemoryError) as exc:
        return CellRecord(P, solver, "failed", lambdas=lambdas, error=f"{type(exc).__name__}: {exc}", metadata=meta)
    status, error = _validated(model, problem, rep)
    if rep.truncated:
        meta["truncated"] = True
    if "restarts" in rep.metadata:
        meta["reads"] = rep.metadata["restarts"]
    elif rep.samples is not None:
        meta["reads"] = len(rep.samples)
    ok = status in ("ok", "infeasible") and rep.objective is not None
    return CellRecord(
        P,
        solver,
        status,
        objective=float(rep.objective) if ok else None,
        violations=int(rep.violations) if ok else None,
        one_hot_violations=int(rep.one_hot_violations) if ok else None,
        balancing_violations=int(rep.balancing_violations) if ok else None,
        aux_violations=int(rep.aux_violations) if ok else None,
        wall_time_s=float(rep.wall_time) if config.record_timing else None,
        energy=None if rep.energy is None else float(rep.energy),
        partition=rep.partition,
        loads=[float(x) for x in rep.loads] if ok else None,
        lambdas=lambdas,
        error=error,
        metadata=meta,
    )


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Solve every (P, solver) cell; failures are recorded and the run goes on."""
    started = _now()
    try:
        graph = load_instance(config)
    except (OSError, ValueError) as exc:
        result = ExperimentResult(config, None, started=started)
        for P in config.partitions:
            for solver in config.solvers:
                result.records.append(CellRecord(P, solver, "failed", error=f"{type(exc).__name__}: {exc}", metadata=config.echo()))
        result.finished = _now()
        if write:
            emit_report(result)
        return result

    result = ExperimentResult(config, graph, started=started)
    compile_fn = compile_qubo_sharing if config.sharing else compile_qubo_plain
    for P in config.partitions:
        model = PartitionModel(graph, P, alpha=config.alpha, beta=config.beta, k=config.k)
        qubo_solvers = [s for s in config.solvers if s != "exhaustive-cqm"]
        weights, problem, setup_error = config.weights(), None, None
        if qubo_solvers:
            try:
                if config.tune:
                    tuned = grid_search_two_stage(model, config.grid_spec(), sharing=config.sharing)
                    weights = tuned.weights
                    result.tuning[P] = tuned
                problem = compile_fn(model, weights)
            except TuningError as exc:
                result.tuning[P] = exc
                setup_error = f"TuningError: {exc}"
            except ValueError as exc:
                setup_error = f"{type(exc).__name__}: {exc}"
        for solver in config.solvers:
            if solver != "exhaustive-cqm" and setup_error is not None:
                result.records.append(CellRecord(P, solver, "failed", error=setup_error, metadata=config.echo()))
                continue
            result.records.append(_cell(config, model, problem, solver, P, weights))
    result.finished = _now()
    if write:
        emit_report(result)
    return result


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def results_csv(records: list[CellRecord]) -> str:
    rows = [
        [r.P, r.solver, _num(r.objective), "" if r.violations is None else r.violations, _num(r.wall_time_s), r.status]
        for r in records
    ]
    return _csv_text(RESULT_COLUMNS, rows)


def plot_csv(records: list[CellRecord], solver_order=SOLVERS) -> str:
    order = {s: i for i, s in enumerate(solver_order)}
    ranked = sorted(records, key=lambda r: (r.P, order.get(r.solver, len(order)), r.solver))
    return _csv_text(PLOT_COLUMNS, [[r.P, r.solver, _num(r.objective)] for r in ranked])


def summary_table(records: list[CellRecord], solvers=None) -> tuple[list[str], list[list[str]]]:
    solvers = list(solvers or dict.fromkeys(r.solver for r in records))
    cells = {(r.P, r.solver): r for r in records}
    header = ["P", *solvers]
    rows = []
    for P in sorted({r.P for r in records}):
        row = [str(P)]
        for s in solvers:
            r = cells.get((P, s))
            if r is None:
                row.append("")
            elif r.status == "failed":
                row.append("failed")
            elif r.objective is None:
                row.append(r.status)
            elif r.status == "infeasible":
                row.append(f"{r.objective:g} ({r.violations} viol.)")
            else:
                row.append(f"{r.objective:g}")
        rows.append(row)
    return header, rows


def format_table(header, rows) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)] if rows else [len(h) for h in header]
    lines = ["  ".join(str(h).rjust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(str(c).rjust(w) for c, w in zip(row, widths)) for row in rows]
    return "\n".join(lines) + "\n"


def emit_report(result: ExperimentResult, out: str | Path | None = None) -> str:
    """Write the CSV/JSON artefacts and return the human-readable table."""
    out = Path(out or result.config.out)
    out.mkdir(parents=True, exist_ok=True)
    records = result.records
    (out / "results.csv").write_text(results_csv(records), encoding="utf-8")
    (out / "plot.csv").write_text(plot_csv(records), encoding="utf-8")
    header, rows = summary_table(records, result.config.solvers)
    (out / "summary.csv").write_text(_csv_text(header, rows), encoding="utf-8")
    table = format_table(header, rows)
    (out / "summary.txt").write_text(table, encoding="utf-8")
    rec_dir = out / "records"
    rec_dir.mkdir(exist_ok=True)
    ids = result.graph.ids if result.graph is not None else None
    for r in records:
        d = r.as_dict()
        if ids is not None and r.partition is not None:
            d["partition"] = {vid: p for vid, p in zip(ids, r.partition)}
        (rec_dir / f"P{r.P}_{r.solver}.json").write_text(json.dumps(d, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for P, tuned in result.tuning.items():
        if isinstance(tuned, TuningError):
            continue
        tuned.write_trace(out / f"tune_P{P}.csv")
    meta = {
        "started": result.started,
        "finished": result.finished,
        "powerpart": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "config": _config_json(result.config),
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return table


def _config_json(config: ExperimentConfig) -> dict:
    d = dataclasses.asdict(config)
    return json.loads(json.dumps(d, default=str))
