"""Network construction, densities, E-I index, QAP tests."""

import numpy as np
import pytest

from vidclick.sna import (
    Adjacency,
    comembership_network,
    density,
    density_by_group,
    edge_list,
    ei_index,
    exact_match_matrix,
    multiplex_and,
    qap_correlation,
    qap_regression,
)


def rng_for(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed])))


def random_graph(n, p, seed, labels=None):
    rng = rng_for(seed)
    m = (rng.random((n, n)) < p).astype(np.int8)
    m = np.triu(m, 1)
    m = m + m.T
    return Adjacency(m, tuple(labels or (f"n{i}" for i in range(n))))


class TestConstruction:
    def test_single_category_complete_graph(self):
        net = comembership_network({"a": 1, "b": 1, "c": 1})
        assert density(net) == 1.0

    def test_distinct_categories_empty_graph(self):
        net = comembership_network({"a": 1, "b": 2, "c": 3})
        assert density(net) == 0.0

    def test_mixed_categories_edge_count(self):
        net = comembership_network({"a": "A", "b": "A", "c": "A", "d": "B", "e": "B"})
        assert net.n_ties == 3 + 1  # C(3,2) + C(2,2)

    def test_exact_match_equals_comembership(self):
        attrs = {"a": 3, "b": 5, "c": 3, "d": 5}
        assert np.array_equal(
            exact_match_matrix(attrs).matrix, comembership_network(attrs).matrix
        )

    def test_adjacency_validation(self):
        with pytest.raises(ValueError):
            Adjacency(np.array([[0, 1], [0, 0]]), ("a", "b"))  # asymmetric
        with pytest.raises(ValueError):
            Adjacency(np.eye(2, dtype=int), ("a", "b"))  # self ties

    def test_edge_list(self):
        net = comembership_network({"a": 1, "b": 1, "c": 2})
        assert edge_list(net) == ["a\tb"]


class TestMultiplexAndDensity:
    def test_and_idempotent(self):
        g = random_graph(15, 0.4, seed=1)
        assert np.array_equal(multiplex_and(g, g).matrix, g.matrix)

    def test_and_with_empty_absorbs(self):
        g = random_graph(10, 0.5, seed=2)
        empty = Adjacency(np.zeros((10, 10), dtype=np.int8), g.labels)
        assert multiplex_and(g, empty).n_ties == 0

    def test_density_not_exceeding_components(self):
        for seed in range(5):
            a = random_graph(20, 0.45, seed=seed)
            b = random_graph(20, 0.55, seed=100 + seed)
            combo = multiplex_and(a, b)
            # brute-force recount of the AND ties
            manual = sum(
                int(a.matrix[i, j] and b.matrix[i, j])
                for i in range(20)
                for j in range(i + 1, 20)
            )
            assert combo.n_ties == manual
            assert density(combo) <= min(density(a), density(b)) + 1e-12

    def test_mismatched_nodes_rejected(self):
        a = random_graph(5, 0.5, seed=1)
        b = random_graph(5, 0.5, seed=2, labels=[f"m{i}" for i in range(5)])
        with pytest.raises(ValueError):
            multiplex_and(a, b)

    def test_group_densities_reconcile(self):
        g = random_graph(30, 0.3, seed=3)
        partition = {label: i % 3 for i, label in enumerate(g.labels)}
        per_group, external = density_by_group(g, partition)
        assert sum(gd.ties for gd in per_group.values()) + external == g.n_ties


class TestEiIndex:
    def test_pure_homophily(self):
        net = comembership_network({"a": 1, "b": 1, "c": 2, "d": 2})
        partition = {"a": 1, "b": 1, "c": 2, "d": 2}
        assert ei_index(net, partition) == -1.0

    def test_pure_heterophily(self):
        m = np.zeros((4, 4), dtype=np.int8)
        for i, j in [(0, 2), (0, 3), (1, 2), (1, 3)]:
            m[i, j] = m[j, i] = 1
        net = Adjacency(m, ("a", "b", "c", "d"))
        partition = {"a": "g1", "b": "g1", "c": "g2", "d": "g2"}
        assert ei_index(net, partition) == 1.0

    def test_hand_counted_mix(self):
        # 3 internal ties, 1 external -> (1 - 3) / 4
        m = np.zeros((5, 5), dtype=np.int8)
        for i, j in [(0, 1), (0, 2), (1, 2), (0, 3)]:
            m[i, j] = m[j, i] = 1
        net = Adjacency(m, tuple("abcde"))
        partition = {"a": 1, "b": 1, "c": 1, "d": 2, "e": 2}
        assert ei_index(net, partition) == pytest.approx(-0.5)

    def test_zero_ties_flagged(self):
        net = Adjacency(np.zeros((3, 3), dtype=np.int8), ("a", "b", "c"))
        with pytest.raises(ValueError):
            ei_index(net, {"a": 1, "b": 1, "c": 2})


class TestQapCorrelation:
    def test_self_correlation_minimal_p(self):
        g = random_graph(20, 0.4, seed=4)
        res = qap_correlation(g, g, n_perm=199, seed=0)
        assert res.r == pytest.approx(1.0)
        assert res.p == pytest.approx(1.0 / 200.0)

    def test_constant_matrix_flagged(self):
        n = 6
        full = Adjacency(
            np.ones((n, n), dtype=np.int8) - np.eye(n, dtype=np.int8),
            tuple(f"n{i}" for i in range(n)),
        )
        g = random_graph(n, 0.5, seed=5)
        with pytest.raises(ValueError):
            qap_correlation(full, g, n_perm=9)

    def test_permutation_preserves_cell_statistics(self):
        g = random_graph(25, 0.35, seed=6)
        mask = ~np.eye(25, dtype=bool)
        base = np.sort(g.matrix[mask])
        rng = rng_for(7)
        for _ in range(20):
            perm = rng.permutation(25)
            permuted = g.matrix[np.ix_(perm, perm)]
            assert np.array_equal(np.sort(permuted[mask]), base)

    def test_relabeled_copy_recovers_r_one(self):
        g = random_graph(18, 0.4, seed=8)
        rng = rng_for(9)
        perm = rng.permutation(18)
        relabeled = Adjacency(g.matrix[np.ix_(perm, perm)], g.labels)
        res = qap_correlation(g, relabeled, n_perm=99, seed=1)
        # the observed r sits inside the permutation distribution's support:
        # applying the inverse relabeling reproduces r = 1 exactly
        inv = np.argsort(perm)
        back = relabeled.matrix[np.ix_(inv, inv)]
        assert np.array_equal(back, g.matrix)
        assert -1.0 <= res.r <= 1.0

    def test_independent_graphs_p_not_extreme(self):
        a = random_graph(30, 0.3, seed=10)
        b = random_graph(30, 0.3, seed=11)
        res = qap_correlation(a, b, n_perm=199, seed=2)
        assert res.p > 0.001

    def test_deterministic_given_seed(self):
        a = random_graph(15, 0.4, seed=12)
        b = random_graph(15, 0.4, seed=13)
        r1 = qap_correlation(a, b, n_perm=99, seed=3)
        r2 = qap_correlation(a, b, n_perm=99, seed=3)
        assert r1 == r2


class TestQapRegression:
    def test_identity_predictor(self):
        g = random_graph(15, 0.4, seed=14)
        res = qap_regression(g, [g], n_perm=99, seed=0)
        assert res.intercept == pytest.approx(0.0, abs=1e-9)
        assert res.coefficients[0] == pytest.approx(1.0, abs=1e-9)
        assert res.r_squared == pytest.approx(1.0)

    def test_planted_dyadic_effect(self):
        rng = rng_for(15)
        n = 50
        x = random_graph(n, 0.5, seed=16)
        y_m = np.zeros((n, n), dtype=np.int8)
        for i in range(n):
            for j in range(i + 1, n):
                p = 0.2 + 0.5 * x.matrix[i, j]
                y_m[i, j] = y_m[j, i] = int(rng.random() < p)
        y = Adjacency(y_m, x.labels)
        res = qap_regression(y, [x], n_perm=1000, seed=4)
        assert res.coefficients[0] == pytest.approx(0.5, abs=0.05)
        assert res.intercept == pytest.approx(0.2, abs=0.05)
        assert res.p_values[0] < 0.01

    def test_collinear_predictors_named(self):
        g = random_graph(12, 0.4, seed=17)
        x = random_graph(12, 0.5, seed=18)
        with pytest.raises(ValueError, match="x1 and x2"):
            qap_regression(g, [x, x], n_perm=9)

    def test_linear_probability_interpretation(self):
        # intercept approximates tie probability at x=0, coefficient the lift
        rng = rng_for(19)
        n = 60
        x = random_graph(n, 0.5, seed=20)
        y_m = np.zeros((n, n), dtype=np.int8)
        for i in range(n):
            for j in range(i + 1, n):
                y_m[i, j] = y_m[j, i] = int(rng.random() < (0.34 if not x.matrix[i, j] else 0.5))
        y = Adjacency(y_m, x.labels)
        res = qap_regression(y, [x], n_perm=99, seed=5)
        assert res.intercept == pytest.approx(0.34, abs=0.06)
        assert res.coefficients[0] == pytest.approx(0.16, abs=0.08)
