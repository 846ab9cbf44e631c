import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from powerpart.qubo import DegreeError, DimensionError, QuadraticModel, Qubo, RegistryError, VariableRegistry, combine

from oracles import dense_energy


def _model(n):
    reg = VariableRegistry([("x", i) for i in range(n)])
    return QuadraticModel(reg)


def test_registry_is_a_stable_bijection():
    reg = VariableRegistry()
    names = [("v", 0, 0), ("v", 0, 1), ("x", 0, 0), ("f", 0, 1, 0)]
    for i, nm in enumerate(names):
        assert reg.add(nm) == i
    assert reg.names == tuple(names)
    assert [reg.index(nm) for nm in names] == [0, 1, 2, 3]
    assert reg.name(2) == ("x", 0, 0)
    assert list(reg.kind("v")) == [0, 1]
    assert list(reg.kind("f")) == [3]
    with pytest.raises(RegistryError):
        reg.add(("v", 0, 0))
    with pytest.raises(RegistryError):
        reg.index(("v", 9, 9))


def test_add_term_accumulates():
    m = _model(2)
    m.add_term(1.0, ("x", 0))
    m.add_term(2.0, ("x", 0))
    assert m.finalize().linear[0] == 3.0


def test_pair_order_is_normalised():
    m = _model(2)
    m.add_term(1.0, ("x", 1), ("x", 0))
    q = m.finalize()
    assert list(zip(q.rows, q.cols, q.values)) == [(0, 1, 1.0)]


def test_constant_term_goes_to_offset():
    m = _model(1)
    m.add_term(5.0)
    assert m.finalize().offset == 5.0


def test_bad_terms_raise():
    m = _model(3)
    with pytest.raises(DegreeError):
        m.add_term(1.0, ("x", 0), ("x", 1), ("x", 2))
    with pytest.raises(RegistryError):
        m.add_term(1.0, ("y", 0))
    with pytest.raises(ValueError):
        m.add_term(float("nan"), ("x", 0))


def test_squared_variable_folds_into_linear():
    m = _model(1)
    m.add_term(2.0, ("x", 0), ("x", 0))
    q = m.finalize()
    assert q.linear[0] == 2.0 and q.num_interactions == 0


def test_evaluate_examples():
    m = _model(2)
    m.add_term(1.0, ("x", 0))
    m.add_term(1.0, ("x", 1))
    m.add_term(-2.0, ("x", 0), ("x", 1))
    q = m.finalize()
    assert q.evaluate([1, 1]) == 0.0
    assert q.evaluate([1, 0]) == 1.0
    m.add_term(7.5)
    assert m.finalize().evaluate([0, 0]) == 7.5


def test_dimension_mismatch():
    q = _model(3).finalize()
    with pytest.raises(DimensionError):
        q.evaluate([0, 1])


def test_zero_terms_pruned_and_upper_triangular():
    m = _model(4)
    m.add_term(1.0, ("x", 2), ("x", 1))
    m.add_term(-1.0, ("x", 1), ("x", 2))
    m.add_term(3.0, ("x", 3), ("x", 0))
    q = m.finalize()
    assert q.num_interactions == 1
    assert np.all(q.rows < q.cols)


@st.composite
def random_models(draw):
    n = draw(st.integers(1, 12))
    coef = st.floats(-10, 10, allow_nan=False, width=64)
    linear = {i: draw(coef) for i in range(n) if draw(st.booleans())}
    quad = {}
    for i in range(n):
        for j in range(n):
            if i != j and draw(st.integers(0, 3)) == 0:
                quad[(i, j)] = quad.get((i, j), 0.0) + draw(coef)
    offset = draw(coef)
    x = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    return n, linear, quad, offset, x


@settings(max_examples=300, deadline=None)
@given(random_models())
def test_evaluate_matches_dense_matrix(case):
    n, linear, quad, offset, x = case
    m = _model(n)
    for i, c in linear.items():
        m.add_term(c, ("x", i))
    for (i, j), c in quad.items():
        m.add_term(c, ("x", i), ("x", j))
    m.add_term(offset)
    q = m.finalize()
    ref = dense_energy(n, linear, quad, offset, x)
    assert q.evaluate(x) == pytest.approx(ref, abs=1e-12, rel=1e-12)
    D = q.dense()
    xv = np.array(x, dtype=float)
    assert xv @ D @ xv + q.offset == pytest.approx(ref, abs=1e-12, rel=1e-12)


def test_incremental_flips_match_full_evaluation():
    rng = np.random.default_rng(11)
    n = 30
    m = _model(n)
    for i in range(n):
        m.add_term(rng.normal(), ("x", i))
    for _ in range(120):
        i, j = rng.choice(n, 2, replace=False)
        m.add_term(rng.normal(), ("x", int(i)), ("x", int(j)))
    q = m.finalize()
    x = rng.integers(0, 2, n).astype(np.int8)
    energy = q.evaluate(x)
    for _ in range(10_000):
        i = int(rng.integers(n))
        delta = q.flip_deltas(x)[i]
        x[i] ^= 1
        energy += delta
        assert energy == pytest.approx(q.evaluate(x), abs=1e-12, rel=1e-12)


def test_batch_energies_match_single():
    rng = np.random.default_rng(2)
    m = _model(8)
    for i in range(8):
        m.add_term(rng.normal(), ("x", i), ("x", (i + 3) % 8))
    q = m.finalize()
    X = rng.integers(0, 2, (50, 8))
    assert np.allclose(q.energies(X), [q.evaluate(x) for x in X], atol=1e-12)


def test_text_round_trip(tmp_path):
    m = _model(3)
    m.add_term(0.1, ("x", 0))
    m.add_term(-1 / 3, ("x", 0), ("x", 2))
    m.add_term(2.5)
    q = m.finalize()
    text = q.to_text()
    assert "c 2.5" in text and "q 0 2" in text
    q.save(tmp_path / "m.qubo")
    back = Qubo.load(tmp_path / "m.qubo")
    for x in np.ndindex(2, 2, 2):
        assert back.evaluate(list(x)) == q.evaluate(list(x))


def test_combine_scales_parts():
    m1, reg = _model(2), None
    reg = m1.registry
    m1.add_term(1.0, ("x", 0))
    m2 = QuadraticModel(reg)
    m2.add_term(2.0, ("x", 0), ("x", 1))
    q = combine([(3.0, m1.finalize()), (0.5, m2.finalize())])
    assert q.evaluate([1, 1]) == pytest.approx(3.0 + 1.0)
