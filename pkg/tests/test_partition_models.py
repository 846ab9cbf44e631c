import itertools
import json

import numpy as np
import pytest

from powerpart.graph import PowerGraph, generate_random_graph
from powerpart.models import (
    DegenerateBalancingError,
    PartitionModel,
    PenaltyWeights,
    balancing_lower_bound,
    compile_qubo_plain,
    compile_qubo_sharing,
    cqm_batch,
    decode_assignment,
    evaluate_cqm,
    flow_value,
    plain_variable_count,
    sharing_balancing_constant,
    sharing_variable_count,
)
from powerpart.penalties import min_slack_values
from powerpart.qubo import DimensionError

import oracles

CYCLE = [(0, 1), (1, 2), (2, 3), (0, 3)]


def cycle(w=0.0):
    return PowerGraph.from_edges([str(i) for i in range(4)], [w] * 4, CYCLE)


def bits(labels, P):
    v = np.zeros(len(labels) * P, dtype=np.int8)
    for n, p in enumerate(labels):
        v[n * P + p] = 1
    return v


def test_cqm_examples():
    m2 = PartitionModel(cycle(), 2)
    ev = evaluate_cqm(m2, bits([0, 0, 1, 1], 2))
    assert (ev.objective, ev.violations) == (68.0, 0)
    ev = evaluate_cqm(PartitionModel(cycle(), 1), bits([0, 0, 0, 0], 1))
    assert (ev.objective, ev.violations) == (16.0, 0)
    ev = evaluate_cqm(PartitionModel(cycle(1.0), 2), bits([0, 0, 1, 1], 2))
    assert ev.balancing_violations == 2
    assert list(ev.loads) == [1.0, 1.0]


def test_cqm_accepts_matrix_and_checks_length():
    m = PartitionModel(cycle(), 2)
    v = bits([0, 1, 1, 0], 2)
    assert evaluate_cqm(m, v.reshape(4, 2)).objective == evaluate_cqm(m, v).objective
    with pytest.raises(DimensionError):
        evaluate_cqm(m, v[:-1])


def test_cqm_counts_one_hot_violations():
    m = PartitionModel(cycle(), 2)
    v = np.array([1, 1, 0, 0, 1, 0, 0, 1], dtype=np.int8)
    assert evaluate_cqm(m, v).one_hot_violations == 2


def test_cqm_matches_oracle_on_random_bits():
    rng = np.random.default_rng(1)
    for seed in range(30):
        g = generate_random_graph(int(rng.integers(2, 7)), 0.6, seed=seed)
        P = int(rng.integers(1, 4))
        m = PartitionModel(g, P)
        edges = [tuple(map(int, e)) for e in g.edges]
        for _ in range(20):
            v = rng.integers(0, 2, g.num_vertices * P)
            ev = evaluate_cqm(m, v)
            assert ev.objective == pytest.approx(oracles.objective_bits(list(g.surplus), edges, v, P))
            assert np.allclose(ev.loads, oracles.loads(list(g.surplus), v, P, 0.5))


def test_cqm_batch_agrees_with_single_evaluation():
    g = generate_random_graph(6, 0.5, seed=4)
    m = PartitionModel(g, 3)
    labels = np.random.default_rng(0).integers(0, 3, (200, 6))
    obj, feas = cqm_batch(m, labels)
    for lab, o, f in zip(labels, obj, feas):
        ev = evaluate_cqm(m, bits(lab, 3))
        assert o == ev.objective and f == (ev.violations == 0)


def test_plain_counts_and_constant():
    g = PowerGraph.from_edges(["0", "1", "2", "3"], [0.2, 0.8, 0.1, 0.3], CYCLE)
    pq = compile_qubo_plain(PartitionModel(g, 2), PenaltyWeights(1, 1, K=6))
    assert pq.num_variables == 20 == plain_variable_count(4, 2, 6)
    g2 = PowerGraph.from_edges(["0", "1"], [0.2, 0.8], [(0, 1)])
    assert balancing_lower_bound(PartitionModel(g2, 2)) == pytest.approx(-0.3)


def test_plain_one_hot_vanishes_on_feasible_assignment():
    pq = compile_qubo_plain(PartitionModel(cycle(0.2), 2), PenaltyWeights(3, 1, K=4))
    x = np.zeros(pq.num_variables, dtype=np.int8)
    x[:8] = bits([0, 1, 1, 0], 2)
    assert pq.penalty_breakdown(x)["one_hot"] == 0.0


def test_plain_rejects_degenerate_balancing():
    with pytest.raises(DegenerateBalancingError):
        compile_qubo_plain(PartitionModel(cycle(0.7), 2), PenaltyWeights(1, 1))
    with pytest.raises(DegenerateBalancingError):
        compile_qubo_plain(PartitionModel(cycle(0.5), 2), PenaltyWeights(1, 1))


def _random_instances(count, seed, max_n=6, max_p=3):
    rng = np.random.default_rng(seed)
    made = 0
    s = 0
    while made < count:
        g = generate_random_graph(int(rng.integers(2, max_n + 1)), 0.6, seed=seed * 1000 + s)
        s += 1
        if balancing_lower_bound(PartitionModel(g, 2)) >= 0:
            continue
        made += 1
        yield g, int(rng.integers(1, max_p + 1)), int(rng.integers(1, 6)), rng


def test_plain_decomposition_against_oracle():
    checked = 0
    for g, P, K, rng in _random_instances(10, 2):
        w = PenaltyWeights(*rng.uniform(0.1, 5, 2), K=K)
        pq = compile_qubo_plain(PartitionModel(g, P), w)
        N = g.num_vertices
        edges = [tuple(map(int, e)) for e in g.edges]
        for _ in range(100):
            x = rng.integers(0, 2, pq.num_variables)
            v = x[: N * P]
            xb = [[x[pq.registry.index(("x", a, p))] for a in range(K)] for p in range(P)]
            ref = (
                oracles.objective_bits(list(g.surplus), edges, v, P)
                + w.lambda_oh * oracles.one_hot_penalty(v, N, P)
                + w.lambda_bc * oracles.plain_balancing(list(g.surplus), v, xb, P, K, 0.5)
            )
            assert pq.qubo.evaluate(x) == pytest.approx(ref, abs=1e-9, rel=1e-12)
            checked += 1
    assert checked == 1000


def test_sharing_decomposition_against_oracle():
    checked = 0
    for g, P, K, rng in _random_instances(10, 3, max_n=5):
        P = max(P, 2)
        w = PenaltyWeights(*rng.uniform(0.1, 5, 3), K=K)
        pq = compile_qubo_sharing(PartitionModel(g, P), w)
        N = g.num_vertices
        edges = [tuple(map(int, e)) for e in g.edges]
        transfer = list(g.transfer)
        for _ in range(100):
            x = rng.integers(0, 2, pq.num_variables)
            v = x[: N * P]
            pbc, paux = oracles.sharing_terms(list(g.surplus), edges, transfer, x, pq.registry, P, K, 0.5)
            ref = (
                oracles.objective_bits(list(g.surplus), edges, v, P)
                + w.lambda_oh * oracles.one_hot_penalty(v, N, P)
                + w.lambda_bc * pbc
                + w.lambda_aux * paux
            )
            assert pq.qubo.evaluate(x) == pytest.approx(ref, abs=1e-9, rel=1e-12)
            checked += 1
    assert checked == 1000


def test_sharing_count_uses_ordered_pairs():
    for N, P, K in itertools.product(range(2, 6), range(1, 5), range(1, 7)):
        g = generate_random_graph(N, 0.7, seed=N + 10 * P)
        if balancing_lower_bound(PartitionModel(g, P)) >= 0:
            continue
        pq = compile_qubo_sharing(PartitionModel(g, P), PenaltyWeights(1, 1, 1, K=K))
        E = g.num_edges
        assert pq.num_variables == sharing_variable_count(N, P, K, E) == P * (N + K + E) + 3 * E * P * (P - 1)
        assert len(pq.registry.kind("a")) == E * P * (P - 1)


def test_sharing_cycle_count_and_single_partition():
    pq = compile_qubo_sharing(PartitionModel(cycle(0.2), 2), PenaltyWeights(1, 1, 1, K=6))
    # 2(4 + 6 + 4) + 3*4*2; the printed count formula would say 64 here
    assert pq.num_variables == 52
    pq1 = compile_qubo_sharing(PartitionModel(cycle(0.2), 1), PenaltyWeights(1, 1, 1, K=6))
    assert pq1.num_variables == 4 + 6 + 4
    assert len(pq1.registry.kind("a")) == 0


def test_sharing_requires_aux_weight():
    with pytest.raises(ValueError):
        compile_qubo_sharing(PartitionModel(cycle(0.2), 2), PenaltyWeights(1, 1, 0))


def _consistent_aux(pq, x):
    reg = pq.registry
    P = pq.model.P
    for n, m in map(tuple, pq.model.graph.edges):
        for p, q in itertools.permutations(range(P), 2):
            x[reg.index(("a", n, m, p, q))] = x[reg.index(("v", n, p))] * x[reg.index(("v", m, q))]
        for p, q in itertools.permutations(range(P), 2):
            fp = x[reg.index(("f", n, m, p))]
            x[reg.index(("y", n, m, p, q))] = fp * x[reg.index(("a", n, m, p, q))]
            x[reg.index(("z", n, m, p, q))] = fp * x[reg.index(("a", n, m, q, p))]
    return x


def test_consistent_auxiliaries_zero_aux_penalty():
    pq = compile_qubo_sharing(PartitionModel(cycle(0.2), 2), PenaltyWeights(1, 1, 1, K=3))
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = _consistent_aux(pq, rng.integers(0, 2, pq.num_variables))
        assert pq.penalty_breakdown(x)["aux"] == 0.0
        assert pq.aux_violations(x) == 0


def _G(pq, x, p, q):
    reg = pq.registry
    total = 0.0
    for e, (n, m) in enumerate(map(tuple, pq.model.graph.edges)):
        w = pq.model.graph.transfer[e]
        total += w * (
            x[reg.index(("y", n, m, p, q))] + x[reg.index(("z", n, m, p, q))]
            - x[reg.index(("y", n, m, q, p))] - x[reg.index(("z", n, m, q, p))]
        )
    return total


def test_sharing_consistency_exhaustive():
    g = PowerGraph.from_edges(["0", "1", "2"], [0.1, 0.9, 0.3], [(0, 1), (1, 2)], transfer=[0.5, 2.0])
    for P in (2, 3):
        pq = compile_qubo_sharing(PartitionModel(g, P), PenaltyWeights(1, 1, 1, K=2))
        reg = pq.registry
        vf = list(pq.registry.kind("v")) + list(pq.registry.kind("f"))
        for free in itertools.product((0, 1), repeat=len(vf)):
            x = np.zeros(pq.num_variables, dtype=np.int64)
            x[vf] = free
            x = _consistent_aux(pq, x)
            V = x[: 3 * P].reshape(3, P)
            F = pq.decode(x).flows
            for p, q in itertools.product(range(P), repeat=2):
                if p == q:
                    continue
                assert _G(pq, x, p, q) == flow_value(g, V, F, p, q)
        assert reg is pq.registry


def test_flow_examples():
    g = cycle(0.2)
    V = bits([0, 0, 1, 1], 2).reshape(4, 2)
    rng = np.random.default_rng(3)
    F = rng.integers(0, 2, (4, 2))
    for p in range(2):
        assert flow_value(g, V, F, p, p) == 0.0
    F = np.zeros((4, 2), dtype=int)
    e12 = [tuple(e) for e in g.edges.tolist()].index((1, 2))
    F[e12, 0] = 1
    assert flow_value(g, V, F, 0, 1) == 1.0
    assert flow_value(g, V, F, 1, 0) == -1.0
    assert flow_value(g, V, np.ones((4, 2), dtype=int), 0, 1) == 0.0


def test_flow_antisymmetry_matches_oracle():
    rng = np.random.default_rng(8)
    for seed in range(20):
        g = generate_random_graph(5, 0.6, seed=seed)
        P = 3
        v = rng.integers(0, 2, 5 * P)
        Fm = rng.integers(0, 2, (g.num_edges, P))
        fdict = {(e, p): Fm[e, p] for e in range(g.num_edges) for p in range(P)}
        edges = [tuple(map(int, e)) for e in g.edges]
        for p, q in itertools.product(range(P), repeat=2):
            val = flow_value(g, v.reshape(5, P), Fm, p, q)
            assert val == -flow_value(g, v.reshape(5, P), Fm, q, p)
            assert val == pytest.approx(oracles.flow(edges, list(g.transfer), v, fdict, p, q, P))


def test_decode_examples():
    pq = compile_qubo_plain(PartitionModel(cycle(0.2), 2), PenaltyWeights(1, 1, K=3))
    x = np.zeros(pq.num_variables, dtype=np.int8)
    x[:8] = bits([0, 1, 1, 0], 2)
    x[pq.registry.index(("x", 1, 0))] = 1
    d = decode_assignment(pq.registry, x, pq.model.graph.ids)
    assert d.partition == [0, 1, 1, 0] and d.complete and d.slack == {0: 2, 1: 0}
    x[0] = 0
    d = pq.decode(x)
    assert d.unassigned == ["0"] and d.partition[0] is None
    x[0] = x[1] = 1
    d = pq.decode(x)
    assert d.multiple == ["0"]


def test_solution_json_export():
    pq = compile_qubo_plain(PartitionModel(cycle(0.2), 2), PenaltyWeights(1, 1, K=3))
    x = np.zeros(pq.num_variables, dtype=np.int8)
    x[:8] = bits([0, 1, 1, 0], 2)
    doc = json.loads(pq.report(x, "manual").to_json(pq.model.graph))
    assert doc["assignment"] == {"0": 0, "1": 1, "2": 1, "3": 0}
    assert doc["objective"] == 68.0 and doc["violations"] == 0
    assert doc["loads"] == pytest.approx([-0.6, -0.6])


def test_reweighted_equals_fresh_compile():
    g = generate_random_graph(5, 0.6, seed=2)
    m = PartitionModel(g, 2)
    base = compile_qubo_plain(m, PenaltyWeights(1, 1, K=4))
    w = PenaltyWeights(7.5, 0.03, K=4)
    fresh = compile_qubo_plain(m, w)
    X = np.random.default_rng(0).integers(0, 2, (200, base.num_variables))
    assert np.allclose(base.reweighted(w).qubo.energies(X), fresh.qubo.energies(X), atol=1e-9)
    with pytest.raises(ValueError):
        base.reweighted(PenaltyWeights(1, 1, K=5))


def test_feasibility_gap():
    rng = np.random.default_rng(12)
    for g, P, K, _ in _random_instances(12, 5, max_n=5):
        w = PenaltyWeights(2.0, 0.7, K=K)
        pq = compile_qubo_plain(PartitionModel(g, P), w)
        m = pq.model
        c = balancing_lower_bound(m)
        alpha_k = (2**K - 0.5) / (-c)
        N = g.num_vertices
        for labels in itertools.product(range(P), repeat=N):
            v = bits(labels, P)
            X = np.zeros((2**K, pq.num_variables), dtype=np.int8)
            X[:, : N * P] = v
            H = evaluate_cqm(m, v).objective
            loads = m.excess @ v.reshape(N, P)
            # exhaustive over one partition's slack at a time (the blocks are independent)
            best = H
            for p, blk in enumerate(pq.slack_blocks):
                Z = ((np.arange(2**K)[:, None] >> np.arange(K)[None, :]) & 1).astype(np.int8)
                Xp = X.copy()
                Xp[:, blk.slack] = Z
                sub = pq.components["balancing"].energies(Xp)
                # other partitions' slack is zero in Xp; subtract their fixed contribution
                others = sum(
                    (alpha_k * (-c + loads[r])) ** 2 for r in range(P) if r != p
                )
                best += w.lambda_bc * (sub.min() - others)
            bound = H + w.lambda_bc * P / 4
            if np.all(loads <= 1e-12):
                assert best <= bound + 1e-9
            else:
                eps = loads[loads > 0]
                extra = w.lambda_bc * sum(alpha_k * e + (alpha_k * e) ** 2 for e in eps)
                assert best >= H + extra - 1e-9
                _, pen = min_slack_values(alpha_k * (-c + loads), K)
                assert best == pytest.approx(H + w.lambda_bc * pen.sum(), abs=1e-7)


def _all_graphs(N):
    pairs = list(itertools.combinations(range(N), 2))
    for mask in range(2 ** len(pairs)):
        yield [pairs[i] for i in range(len(pairs)) if mask >> i & 1]


def test_beta_convention_argmin_invariance():
    rng = np.random.default_rng(21)
    for N in range(1, 6):
        graphs = list(_all_graphs(N))
        if N == 5:
            graphs = [graphs[i] for i in rng.choice(len(graphs), 120, replace=False)]
        for edges in graphs:
            w = list(rng.random(N))
            for P in (1, 2, 3):
                literal, cut = {}, {}
                for labels in itertools.product(range(P), repeat=N):
                    if any(sum(w[n] - 0.5 for n in range(N) if labels[n] == p) > 1e-12 for p in range(P)):
                        continue
                    lit = oracles.objective(w, edges, labels, P)
                    cut_cost = sum(1 for a, b in edges if labels[a] != labels[b])
                    sizes = sum(sum(1 for lab in labels if lab == p) ** 2 for p in range(P))
                    once = sizes + 10.0 * cut_cost
                    assert lit - once == pytest.approx((P - 1) * 10.0 * len(edges))
                    literal[labels], cut[labels] = lit, once
                if not literal:
                    continue
                lo_l, lo_c = min(literal.values()), min(cut.values())
                assert {k for k, v in literal.items() if v == lo_l} == {k for k, v in cut.items() if v == lo_c}


def test_sharing_constant():
    g = PowerGraph.from_edges(["0", "1"], [0.2, 0.8], [(0, 1)], transfer=[1.5])
    assert sharing_balancing_constant(PartitionModel(g, 2)) == pytest.approx(0.3 + 1.5)
