"""Partition models for power networks.

The constrained model assigns every vertex ``n`` to one of ``P`` partitions
via one-hot bits ``v[n, p]`` and minimises

    sum_p alpha * (sum_n v[n, p])**2 + beta * (|E| - sum_{n,m in E} v[n, p] v[m, p])

subject to one-hot rows and per-partition balancing
``sum_n v[n, p] * (w_n - k) <= 0``.  The beta term sits inside the sum over
``p``, so it differs from the plain cut-edge count by the constant
``(P - 1) * beta * |E|``; minimisers are unaffected.

Two QUBO compilations are provided: ``compile_qubo_plain`` (no electricity
sharing) and ``compile_qubo_sharing`` (binary flow variables between adjacent
partitions with pairwise-reduced auxiliaries).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from itertools import permutations
from typing import Optional

import numpy as np

from .graph import PowerGraph
from .penalties import DegenerateRangeError, SlackEncoding, degree_reduction
from .qubo import DimensionError, QuadraticModel, Qubo, VariableRegistry, combine

__all__ = [
    "FEASIBILITY_TOL",
    "DegenerateBalancingError",
    "PartitionModel",
    "PenaltyWeights",
    "CqmEvaluation",
    "SolveReport",
    "SlackBlock",
    "PartitionQubo",
    "Decoded",
    "evaluate_cqm",
    "cqm_batch",
    "balancing_lower_bound",
    "sharing_balancing_constant",
    "compile_qubo_plain",
    "compile_qubo_sharing",
    "flow_value",
    "decode_assignment",
    "plain_variable_count",
    "sharing_variable_count",
    "violation_fraction",
]

# Loads within this distance of zero count as balanced; guards against
# summation noise on loads that are exactly zero in exact arithmetic.
FEASIBILITY_TOL = 1e-12


class DegenerateBalancingError(DegenerateRangeError):
    """No vertex is below the threshold, so balancing admits only empty partitions."""


@dataclass(frozen=True)
class PartitionModel:
    graph: PowerGraph
    partitions: int
    alpha: float = 1.0
    beta: float = 10.0
    k: float = 0.5

    def __post_init__(self):
        if not (isinstance(self.partitions, (int, np.integer)) and self.partitions >= 1):
            raise ValueError(f"partition count must be a positive integer, got {self.partitions!r}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")

    @property
    def N(self) -> int:
        return self.graph.num_vertices

    @property
    def P(self) -> int:
        return self.partitions

    @property
    def excess(self) -> np.ndarray:
        """Per-vertex ``w_n - k``."""
        return self.graph.surplus - self.k


@dataclass(frozen=True)
class PenaltyWeights:
    lambda_oh: float
    lambda_bc: float
    lambda_aux: float = 0.0
    K: int = 10

    def __post_init__(self):
        if min(self.lambda_oh, self.lambda_bc, self.lambda_aux) < 0:
            raise ValueError("Lagrange multipliers must be non-negative")
        if not (isinstance(self.K, (int, np.integer)) and self.K >= 1):
            raise ValueError("K must be a positive integer")

    def as_tuple(self, sharing: bool = False) -> tuple:
        if sharing:
            return (self.lambda_oh, self.lambda_bc, self.lambda_aux)
        return (self.lambda_oh, self.lambda_bc)


def _as_matrix(model: PartitionModel, v) -> np.ndarray:
    v = np.asarray(v)
    if v.shape == (model.N, model.P):
        return v.astype(np.int64)
    if v.shape != (model.N * model.P,):
        raise DimensionError(f"expected {model.N * model.P} partition bits, got shape {v.shape}")
    return v.reshape(model.N, model.P).astype(np.int64)


@dataclass
class CqmEvaluation:
    objective: float
    one_hot_violations: int
    balancing_violations: int
    loads: np.ndarray

    @property
    def violations(self) -> int:
        return self.one_hot_violations + self.balancing_violations


def evaluate_cqm(model: PartitionModel, v, flows=None) -> CqmEvaluation:
    """Objective, violation counts and per-partition loads of bits ``v``.

    ``v`` is either a flat vector indexed ``n * P + p`` or an ``(N, P)``
    array.  With ``flows`` (an ``(|E|, P)`` array of flow bits) the
    balancing check includes the net flow of each partition.
    """
    V = _as_matrix(model, v)
    g = model.graph
    sizes = V.sum(axis=0)
    internal = (V[g.edges[:, 0]] * V[g.edges[:, 1]]).sum(axis=0) if g.num_edges else np.zeros(model.P)
    objective = float(model.alpha * np.sum(sizes**2) + model.beta * np.sum(g.num_edges - internal))
    loads = model.excess @ V
    if flows is not None:
        loads = loads + np.array(
            [sum(flow_value(g, V, flows, p, q) for q in range(model.P)) for p in range(model.P)]
        )
    one_hot = int(np.count_nonzero(V.sum(axis=1) != 1))
    balancing = int(np.count_nonzero(loads > FEASIBILITY_TOL))
    return CqmEvaluation(objective, one_hot, balancing, loads.astype(float))


def cqm_batch(model: PartitionModel, labels: np.ndarray):
    """Objectives and feasibility for one-hot assignments given as labels.

    ``labels`` has shape ``(M, N)`` with the partition of each vertex.
    Returns ``(objectives, feasible)``.
    """
    labels = np.asarray(labels)
    g = model.graph
    M = labels.shape[0]
    onehot = labels[:, :, None] == np.arange(model.P)[None, None, :]
    sizes = onehot.sum(axis=1)
    if g.num_edges:
        internal = (labels[:, g.edges[:, 0]] == labels[:, g.edges[:, 1]]).sum(axis=1)
    else:
        internal = np.zeros(M, dtype=np.int64)
    objectives = model.alpha * (sizes**2).sum(axis=1) + model.beta * (
        model.P * g.num_edges - internal
    )
    loads = np.einsum("mnp,n->mp", onehot, model.excess)
    feasible = np.all(loads <= FEASIBILITY_TOL, axis=1)
    return objectives.astype(float), feasible


def balancing_lower_bound(model: PartitionModel) -> float:
    """Sum of the negative ``w_n - k``: the smallest possible partition load."""
    e = model.excess
    return float(0.5 * np.sum(e - np.abs(e)))


def sharing_balancing_constant(model: PartitionModel) -> float:
    """Non-negative range constant used by the sharing balancing penalty."""
    e = model.excess
    return float(0.5 * np.sum(np.abs(e) - e) + model.graph.transfer.sum())


def plain_variable_count(N: int, P: int, K: int) -> int:
    return P * (N + K)


def sharing_variable_count(N: int, P: int, K: int, E: int) -> int:
    """``P(N + K + |E|)`` plus three auxiliaries per edge and ordered partition pair."""
    return P * (N + K + E) + 3 * E * P * (P - 1)


@dataclass(frozen=True)
class SlackBlock:
    """Slack bits of one balancing penalty and the residual they track.

    The penalty is ``scale * (target(x) - sum_a 2**a x[slack[a]])**2`` with
    ``target(x) = constant + coef . x[support]``; no other term touches the
    slack bits, so they can be set in closed form.
    """

    slack: np.ndarray
    support: np.ndarray
    coef: np.ndarray
    constant: float
    K: int

    def targets(self, X: np.ndarray) -> np.ndarray:
        return self.constant + X[..., self.support] @ self.coef

    def fill(self, X: np.ndarray) -> None:
        """Overwrite the slack columns of ``X`` with their optimal values."""
        zhat = np.clip(np.rint(self.targets(X)), 0, 2**self.K - 1).astype(np.int64)
        X[..., self.slack] = (zhat[..., None] >> np.arange(self.K)) & 1


@dataclass
class SolveReport:
    """Outcome of one solver run, validated against the constrained model."""

    solver: str
    assignment: Optional[np.ndarray]
    objective: Optional[float]
    one_hot_violations: int = 0
    balancing_violations: int = 0
    aux_violations: int = 0
    loads: np.ndarray = field(default_factory=lambda: np.zeros(0))
    energy: Optional[float] = None
    wall_time: float = 0.0
    partition: Optional[list] = None
    status: str = "ok"
    truncated: bool = False
    samples: object = None
    metadata: dict = field(default_factory=dict)

    @property
    def violations(self) -> int:
        return self.one_hot_violations + self.balancing_violations + self.aux_violations

    @property
    def feasible(self) -> bool:
        return self.assignment is not None and self.violations == 0

    def to_json(self, graph: PowerGraph | None = None) -> str:
        mapping = None
        if self.partition is not None:
            ids = graph.ids if graph is not None else [str(i) for i in range(len(self.partition))]
            mapping = {vid: p for vid, p in zip(ids, self.partition)}
        return json.dumps(
            {
                "assignment": mapping,
                "objective": self.objective,
                "violations": self.violations,
                "one_hot_violations": self.one_hot_violations,
                "balancing_violations": self.balancing_violations,
                "aux_violations": self.aux_violations,
                "loads": [float(x) for x in self.loads],
                "energy": self.energy,
                "solver": self.solver,
                "status": self.status,
            },
            indent=2,
        )


@dataclass
class Decoded:
    partition: list
    unassigned: list
    multiple: list
    slack: dict
    flows: Optional[np.ndarray] = None

    @property
    def complete(self) -> bool:
        return not self.unassigned and not self.multiple


def decode_assignment(registry: VariableRegistry, assignment, vertex_ids=None) -> Decoded:
    """Read partitions, slack integers and flow bits out of a QUBO assignment.

    Vertices with zero or several active partition bits are listed in
    ``unassigned``/``multiple`` and get ``None`` in ``partition``.
    """
    x = np.asarray(assignment)
    if x.shape != (len(registry),):
        raise DimensionError(f"assignment has shape {x.shape}, registry has {len(registry)} variables")
    vidx = registry.kind("v")
    names = [registry.name(i) for i in vidx]
    N = max((n for _, n, _ in names), default=-1) + 1
    P = max((p for _, _, p in names), default=-1) + 1
    V = np.zeros((N, P), dtype=np.int64)
    for i, (_, n, p) in zip(vidx, names):
        V[n, p] = x[i]
    ids = list(vertex_ids) if vertex_ids is not None else list(range(N))
    partition, unassigned, multiple = [], [], []
    for n in range(N):
        count = V[n].sum()
        if count == 1:
            partition.append(int(np.argmax(V[n])))
        else:
            partition.append(None)
            (unassigned if count == 0 else multiple).append(ids[n])
    slack: dict[int, int] = {}
    for i in registry.kind("x"):
        _, a, p = registry.name(i)
        slack[p] = slack.get(p, 0) + (int(x[i]) << a)
    flows = None
    fidx = registry.kind("f")
    if len(fidx):
        edge_order = {}
        cells = []
        for i in fidx:
            _, n, m, p = registry.name(i)
            e = edge_order.setdefault((n, m), len(edge_order))
            cells.append((e, p, x[i]))
        flows = np.zeros((len(edge_order), P), dtype=np.int64)
        for e, p, val in cells:
            flows[e, p] = val
    return Decoded(partition, unassigned, multiple, slack, flows)


def flow_value(graph: PowerGraph, v, f, p: int, q: int) -> float:
    """Net flow from partition ``p`` to ``q``.

    ``v`` is ``(N, P)``; ``f`` is ``(|E|, P)`` in the graph's edge order.
    """
    V = np.asarray(v).reshape(graph.num_vertices, -1)
    F = np.asarray(f).reshape(graph.num_edges, -1)
    n, m = graph.edges[:, 0], graph.edges[:, 1]
    crossing = V[n, p] * V[m, q] + V[m, p] * V[n, q]
    return float(np.sum(graph.transfer * (F[:, p] - F[:, q]) * crossing))


# ---- compilation -------------------------------------------------------------


@dataclass
class PartitionQubo:
    """A compiled partition QUBO plus everything needed to interpret it."""

    model: PartitionModel
    weights: PenaltyWeights
    registry: VariableRegistry
    components: dict
    slack_blocks: tuple
    sharing: bool
    qubo: Qubo = None

    def __post_init__(self):
        if self.qubo is None:
            self.qubo = combine(
                (self._multiplier(name), comp) for name, comp in self.components.items()
            )

    def _multiplier(self, name: str) -> float:
        return {
            "objective": 1.0,
            "one_hot": self.weights.lambda_oh,
            "balancing": self.weights.lambda_bc,
            "aux": self.weights.lambda_aux,
        }[name]

    def __iter__(self):
        # (qubo, registry) unpacking
        yield self.qubo
        yield self.registry

    def reweighted(self, weights: PenaltyWeights) -> "PartitionQubo":
        """Same structure, new multipliers; K must not change."""
        if weights.K != self.weights.K:
            raise ValueError("changing K needs a fresh compilation")
        _check_weights(weights, self.sharing, self.model.P)
        return replace(self, weights=weights, qubo=None)

    @property
    def num_variables(self) -> int:
        return len(self.registry)

    def v_indices(self) -> np.ndarray:
        return np.arange(self.model.N * self.model.P)

    def decode(self, assignment) -> Decoded:
        return decode_assignment(self.registry, assignment, self.model.graph.ids)

    def aux_violations(self, x) -> int:
        if not self.sharing:
            return 0
        x = np.asarray(x)
        reg = self.registry
        bad = 0
        for (n, m) in map(tuple, self.model.graph.edges):
            for p, q in permutations(range(self.model.P), 2):
                a = x[reg.index(("a", n, m, p, q))]
                y = x[reg.index(("y", n, m, p, q))]
                z = x[reg.index(("z", n, m, p, q))]
                fp = x[reg.index(("f", n, m, p))]
                bad += int(a != x[reg.index(("v", n, p))] * x[reg.index(("v", m, q))])
                bad += int(y != fp * a)
                bad += int(z != fp * x[reg.index(("a", n, m, q, p))])
        return bad

    def cqm_flows(self, x, decoded: Decoded | None = None) -> Optional[np.ndarray]:
        """Flow bits in the orientation of the constrained model (None without sharing).

        The sharing penalty adds ``sum_q G(q, p) = -sum_q F(p, q)``, so it
        reads the flow bits with the opposite orientation to the
        constraint.  Complementing every bit negates F, hence the
        constraint is checked on ``1 - f``.
        """
        if not self.sharing:
            return None
        dec = decoded if decoded is not None else self.decode(x)
        return 1 - dec.flows

    def report(self, x, solver: str = "", **extra) -> SolveReport:
        """Validate assignment ``x`` against the constrained model."""
        x = np.asarray(x, dtype=np.int8)
        dec = self.decode(x)
        ev = evaluate_cqm(self.model, x[: self.model.N * self.model.P], self.cqm_flows(x, dec))
        return SolveReport(
            solver=solver,
            assignment=x,
            objective=ev.objective,
            one_hot_violations=ev.one_hot_violations,
            balancing_violations=ev.balancing_violations,
            aux_violations=self.aux_violations(x),
            loads=ev.loads,
            energy=self.qubo.evaluate(x),
            partition=dec.partition if dec.complete else None,
            **extra,
        )

    def penalty_breakdown(self, x) -> dict:
        return {name: comp.evaluate(x) for name, comp in self.components.items()}


def _check_weights(weights: PenaltyWeights, sharing: bool, P: int) -> None:
    if sharing and weights.lambda_aux <= 0:
        raise ValueError("lambda_aux must be positive: auxiliary products are otherwise unenforced")


def _register_plain(model: PartitionModel, K: int) -> VariableRegistry:
    reg = VariableRegistry()
    for n in range(model.N):
        for p in range(model.P):
            reg.add(("v", n, p))
    for p in range(model.P):
        for a in range(K):
            reg.add(("x", a, p))
    return reg


def _objective(model: PartitionModel, reg: VariableRegistry) -> QuadraticModel:
    H = QuadraticModel(reg)
    g = model.graph
    for p in range(model.P):
        H.add_squared(((1.0, ("v", n, p)) for n in range(model.N)), 0.0, model.alpha)
        H.add_term(model.beta * g.num_edges)
        for n, m in g.edges:
            H.add_term(-model.beta, ("v", int(n), p), ("v", int(m), p))
    return H


def _one_hot(model: PartitionModel, reg: VariableRegistry) -> QuadraticModel:
    Poh = QuadraticModel(reg)
    for n in range(model.N):
        Poh.add_squared(((1.0, ("v", n, p)) for p in range(model.P)), -1.0)
    return Poh


def _scaled_residual(
    builder: QuadraticModel,
    model: PartitionModel,
    p: int,
    encoding: SlackEncoding,
    extra_terms=(),
) -> SlackBlock:
    """Add ``(alpha_K (load_p - lower) + extra - sum_a 2**a x_ap)**2`` for partition ``p``.

    The plain model passes ``lower = c <= 0`` (so ``-lower`` is the shift);
    the sharing model passes ``lower = -c`` with its non-negative ``c``.
    """
    reg = builder.registry
    alpha = encoding.alpha
    load = [(alpha * e, ("v", n, p)) for n, e in enumerate(model.excess)]
    slack = [(-(2.0**a), ("x", a, p)) for a in range(encoding.K)]
    extra_terms = list(extra_terms)
    constant = -alpha * encoding.lower
    builder.add_squared(load + list(extra_terms) + slack, constant)

    support_terms: dict[int, float] = {}
    for c, name in load + extra_terms:
        i = reg.index(name)
        support_terms[i] = support_terms.get(i, 0.0) + c
    support = np.array(sorted(support_terms), dtype=np.int64)
    return SlackBlock(
        slack=np.array([reg.index(("x", a, p)) for a in range(encoding.K)], dtype=np.int64),
        support=support,
        coef=np.array([support_terms[i] for i in support]),
        constant=constant,
        K=encoding.K,
    )


def compile_qubo_plain(model: PartitionModel, weights: PenaltyWeights) -> PartitionQubo:
    """QUBO without electricity sharing.

    Variables are ``v[n, p]`` (index ``n * P + p``) followed by slack bits
    ``x[a, p]``, ``P * (N + K)`` in total.  The energy is
    ``H(v) + lambda_oh * P_oh(v) + lambda_bc * P_bc(v, x; K)``.
    """
    _check_weights(weights, False, model.P)
    c = balancing_lower_bound(model)
    if c >= 0:
        raise DegenerateBalancingError(
            "every vertex has surplus >= k; balancing only admits empty partitions"
        )
    encoding = SlackEncoding(weights.K, lower=c, bound=0.0)
    reg = _register_plain(model, weights.K)
    H = _objective(model, reg)
    Poh = _one_hot(model, reg)
    Pbc = QuadraticModel(reg)
    blocks = tuple(_scaled_residual(Pbc, model, p, encoding) for p in range(model.P))
    return PartitionQubo(
        model,
        weights,
        reg,
        {"objective": H.finalize(), "one_hot": Poh.finalize(), "balancing": Pbc.finalize()},
        blocks,
        sharing=False,
    )


def _edge_list(model: PartitionModel):
    return [(int(n), int(m)) for n, m in model.graph.edges]


def compile_qubo_sharing(model: PartitionModel, weights: PenaltyWeights) -> PartitionQubo:
    """QUBO with electricity sharing between adjacent partitions.

    Adds flow bits ``f[n, m, p]`` per edge and partition and, for every
    edge and ordered pair ``p != q``, auxiliaries ``a = v[n,p] v[m,q]``,
    ``y = f[n,m,p] a[n,m,p,q]`` and ``z = f[n,m,p] a[n,m,q,p]`` enforced by
    ``lambda_aux * P_aux``.  The balancing penalty for partition ``p`` is

        (alpha_K (c + load_p) + sum_{q != p} G(q, p) - sum_a 2**a x[a, p])**2

    with ``alpha_K = (2**K - 1/2) / c`` and ``c`` from
    :func:`sharing_balancing_constant`.
    """
    _check_weights(weights, True, model.P)
    if balancing_lower_bound(model) >= 0:
        raise DegenerateBalancingError(
            "every vertex has surplus >= k; balancing only admits empty partitions"
        )
    c = sharing_balancing_constant(model)
    encoding = SlackEncoding(weights.K, lower=-c, bound=0.0)
    P = model.P
    edges = _edge_list(model)
    pairs = list(permutations(range(P), 2))

    reg = _register_plain(model, weights.K)
    for n, m in edges:
        for p in range(P):
            reg.add(("f", n, m, p))
    for tag in ("a", "y", "z"):
        for n, m in edges:
            for p, q in pairs:
                reg.add((tag, n, m, p, q))

    H = _objective(model, reg)
    Poh = _one_hot(model, reg)
    Pbc = QuadraticModel(reg)
    transfer = model.graph.transfer
    blocks = []
    for p in range(P):
        # sum_{q != p} G(y, z; q, p)
        G = []
        for e, (n, m) in enumerate(edges):
            w = float(transfer[e])
            for q in range(P):
                if q == p:
                    continue
                G += [
                    (w, ("y", n, m, q, p)),
                    (w, ("z", n, m, q, p)),
                    (-w, ("y", n, m, p, q)),
                    (-w, ("z", n, m, p, q)),
                ]
        blocks.append(_scaled_residual(Pbc, model, p, encoding, G))

    Paux = QuadraticModel(reg)
    for n, m in edges:
        for p, q in pairs:
            a = ("a", n, m, p, q)
            degree_reduction(Paux, ("v", n, p), ("v", m, q), a, check_fresh=False)
            degree_reduction(Paux, ("f", n, m, p), a, ("y", n, m, p, q), check_fresh=False)
            degree_reduction(Paux, ("f", n, m, p), ("a", n, m, q, p), ("z", n, m, p, q), check_fresh=False)

    return PartitionQubo(
        model,
        weights,
        reg,
        {
            "objective": H.finalize(),
            "one_hot": Poh.finalize(),
            "balancing": Pbc.finalize(),
            "aux": Paux.finalize(),
        },
        tuple(blocks),
        sharing=True,
    )


def violation_fraction(graph: PowerGraph, k: float, partitions: int = 2, samples: int | None = None, seed: int = 0) -> float:
    """Share of one-hot assignments that break at least one balancing constraint.

    Exhaustive when ``samples`` is None, otherwise estimated from uniformly
    drawn assignments.
    """
    model = PartitionModel(graph, partitions, k=k)
    N = graph.num_vertices
    if samples is None:
        total = partitions**N
        if total > 10**7:
            raise ValueError("too many assignments to enumerate; pass samples=")
        bad = 0
        for labels in _label_chunks(N, partitions):
            _, feasible = cqm_batch(model, labels)
            bad += int(np.count_nonzero(~feasible))
        return bad / total
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, partitions, size=(samples, N))
    _, feasible = cqm_batch(model, labels)
    return float(np.count_nonzero(~feasible)) / samples


def _label_chunks(N: int, P: int, chunk: int = 1 << 18):
    """All ``P**N`` label vectors in lexicographic order, in chunks."""
    total = P**N
    powers = P ** np.arange(N - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        yield (codes[:, None] // powers[None, :]) % P
