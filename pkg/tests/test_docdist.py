import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlconflict import DataError
from mlconflict.docdist import BowVector, CostOracle, distance_matrix, rwmd, speech_similarity_matrix, wmd_exact
from mlconflict.text.glove import EmbeddingSpace
from oracles import transport_by_vertex_enumeration


def make_space(rng, n=6, d=3):
    vocab = tuple(f"w{i}" for i in range(n))
    return EmbeddingSpace(vocab, rng.normal(size=(n, d)))


def random_doc(rng, vocab, max_tokens, name="d"):
    k = int(rng.integers(1, max_tokens + 1))
    toks = rng.choice(vocab, size=k, replace=False)
    mass = rng.dirichlet(np.ones(k))
    mass = mass / mass.sum()
    return BowVector(name, dict(zip(toks, mass)))


def test_identical_documents_zero(rng):
    space = make_space(rng)
    costs = CostOracle(space)
    a = random_doc(rng, space.vocabulary, 4)
    assert rwmd(a, a, costs) == 0.0
    assert rwmd(a, a, costs, "one-sided") == 0.0
    assert wmd_exact(a, a, costs) == pytest.approx(0.0, abs=1e-12)


def test_single_mass_distance(rng):
    space = make_space(rng)
    costs = CostOracle(space)
    a, b = BowVector("a", {"w0": 1.0}), BowVector("b", {"w1": 1.0})
    expected = np.linalg.norm(space.vector("w0") - space.vector("w1"))
    assert rwmd(a, b, costs) == pytest.approx(expected)
    assert wmd_exact(a, b, costs) == pytest.approx(expected)


def test_one_sided_formula(rng):
    space = make_space(rng)
    costs = CostOracle(space)
    a = BowVector("a", {"w0": 0.3, "w1": 0.7})
    b = BowVector("b", {"w2": 0.5, "w3": 0.5})
    c = lambda x, y: np.linalg.norm(space.vector(x) - space.vector(y))  # noqa: E731
    expected = 0.3 * min(c("w0", "w2"), c("w0", "w3")) + 0.7 * min(c("w1", "w2"), c("w1", "w3"))
    assert rwmd(a, b, costs, "one-sided") == pytest.approx(expected)
    back = 0.5 * min(c("w2", "w0"), c("w2", "w1")) + 0.5 * min(c("w3", "w0"), c("w3", "w1"))
    assert rwmd(a, b, costs) == pytest.approx(max(expected, back))


def test_exact_matches_vertex_enumeration(rng):
    for _ in range(60):
        space = make_space(rng)
        costs = CostOracle(space)
        a = random_doc(rng, space.vocabulary, 3)
        b = random_doc(rng, space.vocabulary, 3)
        ta, tb = a.tokens(), b.tokens()
        cost = costs.matrix(ta, tb)
        oracle = transport_by_vertex_enumeration(a.masses(ta), b.masses(tb), cost)
        assert wmd_exact(a, b, costs) == pytest.approx(oracle, abs=1e-6)


def test_rwmd_lower_bound(rng):
    for _ in range(200):
        space = make_space(rng)
        costs = CostOracle(space)
        a = random_doc(rng, space.vocabulary, 6)
        b = random_doc(rng, space.vocabulary, 6)
        assert rwmd(a, b, costs) <= wmd_exact(a, b, costs) + 1e-9


def test_rwmd_symmetric_nonnegative(rng):
    space = make_space(rng)
    costs = CostOracle(space)
    for _ in range(50):
        a = random_doc(rng, space.vocabulary, 4)
        b = random_doc(rng, space.vocabulary, 4)
        assert rwmd(a, b, costs) == rwmd(b, a, costs) >= 0


def test_empty_document_is_error(rng):
    costs = CostOracle(make_space(rng))
    with pytest.raises(DataError):
        rwmd(BowVector("a", {}), BowVector("b", {"w0": 1.0}), costs)


def test_exact_size_limit(rng):
    vocab = tuple(f"w{i}" for i in range(60))
    costs = CostOracle(EmbeddingSpace(vocab, rng.normal(size=(60, 2))))
    a = BowVector("a", {t: 1 / 30 for t in vocab[:30]})
    b = BowVector("b", {t: 1 / 30 for t in vocab[30:]})
    with pytest.raises(ValueError):
        wmd_exact(a, b, costs)


def test_bow_masses_must_sum_to_one():
    with pytest.raises(DataError):
        BowVector("a", {"x": 0.5})
    bow = BowVector.from_tokens("a", ["x", "y", "x", "z"], vocabulary={"x", "y"})
    assert bow.weights == {"x": 2 / 3, "y": 1 / 3}


def test_similarity_matrix(rng):
    space = make_space(rng, n=20, d=4)
    costs = CostOracle(space)
    docs = [random_doc(rng, space.vocabulary, 5, name=i) for i in range(10)]
    dist, sim = speech_similarity_matrix(docs, costs)
    recomputed = np.array([[rwmd(a, b, costs) for b in docs] for a in docs])
    assert np.allclose(dist, recomputed)
    off = ~np.eye(10, dtype=bool)
    assert np.allclose(sim[off], 1 - recomputed[off] / recomputed[off].max())
    assert np.all(np.diag(sim) == 0) and np.allclose(sim, sim.T)
    i, j = np.unravel_index(np.argmax(dist), dist.shape)
    assert sim[i, j] == 0.0


def test_duplicate_documents_similarity_one(rng):
    space = make_space(rng)
    costs = CostOracle(space)
    a = random_doc(rng, space.vocabulary, 3, "a")
    b = BowVector("b", dict(a.weights))
    c = BowVector("c", {"w5": 1.0} if "w5" not in a.weights else {"w4": 1.0})
    _, sim = speech_similarity_matrix([a, b, c], costs)
    assert sim[0, 1] == 1.0


def test_all_identical_corpus_warns(rng, caplog):
    costs = CostOracle(make_space(rng))
    docs = [BowVector(i, {"w0": 1.0}) for i in range(3)]
    _, sim = speech_similarity_matrix(docs, costs)
    assert np.array_equal(sim, 1 - np.eye(3))
    assert "identical" in caplog.text


def test_similarity_needs_two_documents(rng):
    with pytest.raises(DataError):
        speech_similarity_matrix([BowVector(0, {"w0": 1.0})], CostOracle(make_space(rng)))


def test_cost_oracle_properties(rng):
    costs = CostOracle(make_space(rng))
    assert costs("w1", "w1") == 0.0
    assert costs("w1", "w2") == costs("w2", "w1") > 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_distance_matrix_symmetric(seed):
    rng = np.random.default_rng(seed)
    space = make_space(rng)
    docs = [random_doc(rng, space.vocabulary, 4, i) for i in range(4)]
    d = distance_matrix(docs, CostOracle(space))
    assert np.allclose(d, d.T) and np.all(np.diag(d) == 0) and np.all(d >= 0)
