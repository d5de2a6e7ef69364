import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pancakes.compressor import compress
from pancakes.errors import InvalidInputError, UnsupportedMetricError
from pancakes.metrics import get_metric
from pancakes.search import (
    CompressedView,
    knn_breadth_first,
    knn_depth_first,
    knn_repeated_rnn,
    linear_scan,
    rnn_search,
    weighted_select,
)
from pancakes.store import CompressedIndex, serialize_index
from pancakes.synthetic import aligned_corpus, mutated_corpus, random_sequences, random_sets, topic_sets
from pancakes.tree import PartitionCriteria, build_tree

from oracles import exact_distances, levenshtein_dp, levenshtein_many, same_distance

KNN = [knn_breadth_first, knn_depth_first]


def _setup(data, name, aux=None, seed=0, criteria=None):
    tree = build_tree(data, get_metric(name), criteria, seed=seed,
                      aux_metric=get_metric(aux) if aux else None)
    return tree, CompressedIndex(serialize_index(compress(tree)))


def _oracle(name, data, q):
    exact = exact_distances(name, q, data)
    return sorted(zip(exact, range(len(data))))


def _check_rnn(res, oracle, radius):
    # radii compare against the correctly rounded distance
    expect = [(i, d) for d, i in oracle if float(d) <= radius]
    assert res.ids == [i for i, _ in expect]
    assert all(same_distance(g, e) for g, (_, e) in zip(res.distances, expect))


def _check_knn(res, oracle, k):
    k = min(k, len(oracle))
    assert len(res) == k
    assert all(same_distance(g, e) for g, (e, _) in zip(res.distances, oracle[:k]))
    # smallest ids win ties at the k-th distance
    assert res.ids == [i for _, i in oracle[:k]]


SEQ_CASES = [
    ("hamming", lambda: mutated_corpus(1000, n_seeds=20, length=(48, 48), indels=False, seed=11)),
    ("levenshtein", lambda: mutated_corpus(1000, n_seeds=20, length=(30, 60), max_rate=0.1, seed=11)),
]
SET_CASES = [
    ("jaccard", lambda: topic_sets(1000, n_topics=20, universe=2000, seed=11)),
    ("dice", lambda: topic_sets(1000, n_topics=20, universe=2000, seed=11)),
]


@pytest.fixture(scope="module", params=SEQ_CASES + SET_CASES, ids=lambda c: c[0])
def case(request):
    name, make = request.param
    data = make()
    tree, idx = _setup(data, name, seed=3)
    return name, data, tree, idx


def _queries(name, data, rng, count):
    m = get_metric(name)
    out = []
    for _ in range(count):
        base = data[int(rng.integers(len(data)))]
        if m.kind == "set":
            base = np.union1d(base[rng.random(len(base)) < 0.7], rng.integers(0, 2000, 2))
        elif name == "hamming":
            arr = np.frombuffer(base, dtype=np.uint8).copy()
            hit = rng.random(arr.size) < 0.1
            arr[hit] = np.frombuffer(b"ACGT", dtype=np.uint8)[rng.integers(0, 4, int(hit.sum()))]
            base = arr.tobytes()
        else:
            base = base[: int(rng.integers(len(base) // 2, len(base) + 1))] + b"GATTACA"
        out.append(base)
    return out


class TestExactness:
    def test_rnn(self, case, rng):
        name, data, tree, idx = case
        for q in _queries(name, data, rng, 40):
            oracle = _oracle(name, data, q)
            radius = float(oracle[int(rng.integers(0, 30))][0])
            for view in (idx, tree):
                _check_rnn(rnn_search(view, q, radius), oracle, radius)

    @pytest.mark.parametrize("k", [1, 10, 100])
    def test_knn(self, case, rng, k):
        name, data, tree, idx = case
        algs = KNN + ([knn_repeated_rnn] if get_metric(name).kind != "set" else [])
        for q in _queries(name, data, rng, 15):
            oracle = _oracle(name, data, q)
            for alg in algs:
                _check_knn(alg(idx, q, k), oracle, k)
            _check_knn(knn_depth_first(tree, q, k), oracle, k)

    def test_debug_mode_checks_prunes(self, case, rng):
        name, data, _, idx = case
        for q in _queries(name, data, rng, 5):
            oracle = _oracle(name, data, q)
            rnn_search(idx, q, float(oracle[5][0]), debug=True)
            knn_breadth_first(idx, q, 7, debug=True)
            knn_depth_first(idx, q, 7, debug=True)

    def test_linear_scan_mode(self, case, rng):
        name, data, _, idx = case
        q = _queries(name, data, rng, 1)[0]
        oracle = _oracle(name, data, q)
        _check_knn(linear_scan(idx, q, k=10), oracle, 10)


class TestEdgeCases:
    def test_rho_zero_finds_duplicates(self):
        data = [b"ACGT", b"ACGA", b"ACGT", b"TTTT"]
        _, idx = _setup(data, "hamming")
        res = rnn_search(idx, b"ACGT", 0)
        assert res.hits == [(0, 0), (2, 0)]

    def test_huge_radius_returns_everything(self):
        data = random_sequences(200, 30, seed=2)
        tree, idx = _setup(data, "hamming")
        q = data[5]
        big = get_metric("hamming").distance(q, data[tree.root.center]) + tree.root.radius
        assert sorted(rnn_search(idx, q, big).ids) == list(range(200))

    def test_k_equals_n(self):
        data = random_sequences(64, (5, 20), seed=3)
        _, idx = _setup(data, "levenshtein")
        for alg in KNN + [knn_repeated_rnn]:
            assert sorted(alg(idx, b"ACGTACGT", 64).ids) == list(range(64))

    def test_k_clamped(self):
        data = random_sequences(10, 8, seed=3)
        _, idx = _setup(data, "hamming")
        assert len(knn_depth_first(idx, data[0], 50)) == 10

    def test_self_query(self):
        data = random_sequences(100, (10, 30), seed=4)
        _, idx = _setup(data, "levenshtein")
        for alg in KNN + [knn_repeated_rnn]:
            assert alg(idx, data[17], 1).hits == [(17, 0)]

    def test_single_leaf_tree(self):
        data = random_sequences(50, 12, seed=5)
        tree, idx = _setup(data, "hamming", criteria=PartitionCriteria(max_depth=0))
        assert idx.n_nodes == 1
        q = data[3]
        _check_knn(knn_breadth_first(idx, q, 5), _oracle("hamming", data, q), 5)

    def test_far_query(self):
        data = topic_sets(300, n_topics=5, universe=100, seed=6)
        tree, idx = _setup(data, "jaccard")
        q = np.arange(10_000, 10_020)  # disjoint from every set
        _check_knn(knn_depth_first(idx, q, 5), _oracle("jaccard", data, q), 5)
        seqs = random_sequences(300, 20, seed=6)
        _, sidx = _setup(seqs, "levenshtein")
        far = b"N" * 200
        _check_knn(knn_depth_first(sidx, far, 5), _oracle("levenshtein", seqs, far), 5)

    def test_empty_index(self):
        _, idx = _setup([], "hamming")
        assert rnn_search(idx, b"A", 3).hits == []

    def test_bad_arguments(self):
        _, idx = _setup(random_sequences(20, 8, seed=1), "hamming")
        with pytest.raises(InvalidInputError):
            rnn_search(idx, b"ACGTACGT", -1)
        with pytest.raises(InvalidInputError):
            knn_depth_first(idx, b"ACGTACGT", 0)
        with pytest.raises(UnsupportedMetricError):
            rnn_search(idx, [1, 2, 3], 1)
        _, sidx = _setup(random_sets(20, 50, seed=1), "jaccard")
        with pytest.raises(UnsupportedMetricError):
            rnn_search(sidx, b"ACGT", 0.5)
        with pytest.raises(UnsupportedMetricError):
            knn_repeated_rnn(sidx, [1, 2], 3)

    def test_hamming_length_mismatch(self):
        _, idx = _setup(random_sequences(20, 8, seed=1), "hamming")
        with pytest.raises(InvalidInputError):
            knn_depth_first(idx, b"ACG", 2)


class TestMixedMode:
    def test_gapless_queries_exact(self, rng):
        data = aligned_corpus(600, width=50, n_seeds=8, seed=9)
        tree, idx = _setup(data, "hamming", aux="levenshtein-gapless")
        for _ in range(25):
            q = data[int(rng.integers(len(data)))].replace(b"-", b"")
            q = q[: len(q) - int(rng.integers(0, 4))]
            oracle = _oracle("levenshtein-gapless", data, q)
            radius = float(oracle[int(rng.integers(0, 20))][0])
            _check_rnn(rnn_search(idx, q, radius, debug=True), oracle, radius)
            for alg in KNN + [knn_repeated_rnn]:
                _check_knn(alg(idx, q, 10), oracle, 10)


class TestInstrumentation:
    def test_counters(self):
        data = mutated_corpus(800, n_seeds=16, length=(40, 40), indels=False, seed=2)
        _, idx = _setup(data, "hamming")
        res = knn_depth_first(idx, data[0], 5)
        assert res.distance_computations >= res.clusters_visited > 0
        assert 0 < res.points_decompressed <= 800
        assert res.decompressed_fraction == res.points_decompressed / 800

    def test_selective_on_clustered_data(self):
        data = mutated_corpus(2000, n_seeds=40, length=(60, 60), indels=False, max_rate=0.03, seed=2)
        _, idx = _setup(data, "hamming")
        res = rnn_search(idx, data[0], 0)
        assert res.decompressed_fraction < 0.1

    def test_fraction_monotone_in_radius(self, rng):
        data = mutated_corpus(1000, n_seeds=20, length=(40, 40), indels=False, seed=4)
        _, idx = _setup(data, "hamming")
        for q in data[:10]:
            fracs = [rnn_search(idx, q, r).decompressed_fraction for r in (0, 2, 4, 8, 16, 32, 64)]
            assert fracs == sorted(fracs)

    def test_session_cache_shared_across_passes(self):
        data = random_sequences(300, (20, 40), seed=8)
        _, idx = _setup(data, "levenshtein")
        view = CompressedView(idx)
        res = knn_repeated_rnn(view, data[1], 20)
        assert res.extra["passes"] >= 1
        assert view.session.centers_decoded <= idx.n_nodes


class TestWeightedSelect:
    def test_examples(self):
        assert weighted_select([5, 1, 3], [1, 1, 1], 2) == 3
        assert weighted_select([5, 1, 3], [1, 10, 1], 2) == 1
        assert weighted_select([2, 2, 2], [1, 1, 1], 3) == 2
        assert weighted_select([1], [1], 5) == float("inf")

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 20), st.integers(1, 5)), min_size=1, max_size=40),
           st.integers(1, 100))
    def test_matches_sorting(self, pairs, k):
        values = [v for v, _ in pairs]
        weights = [w for _, w in pairs]
        expect = float("inf")
        acc = 0
        for v, w in sorted(pairs):
            acc += w
            if acc >= k:
                expect = v
                break
        assert weighted_select(values, weights, k) == expect


def test_vectorised_oracle_matches_dp(rng):
    pool = random_sequences(60, (0, 25), seed=1)
    for q in pool[:10]:
        assert list(levenshtein_many(q, pool)) == [levenshtein_dp(q, p) for p in pool]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.binary(min_size=3, max_size=3), min_size=1, max_size=60),
       st.binary(min_size=3, max_size=3), st.integers(1, 8), st.integers(0, 3))
def test_property_knn_agreement(data, q, k, radius):
    tree, idx = _setup(data, "hamming", seed=1)
    oracle = _oracle("hamming", data, q)
    for alg in KNN + [knn_repeated_rnn]:
        _check_knn(alg(idx, q, k), oracle, k)
    _check_rnn(rnn_search(idx, q, radius), oracle, radius)
