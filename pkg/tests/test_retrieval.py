import numpy as np
import pytest

from oracles import pairwise_cosine_loop, pairwise_euclidean_loop, rerank_reference
from reidkit.core import DistanceMatrix, Embedding
from reidkit.retrieval import (
    QeParams,
    RerankParams,
    SpatialFeatureSet,
    cosine_distances,
    dsr_score,
    euclidean_distances,
    k_reciprocal_rerank,
    query_expansion,
    rank_lists,
)


class TestEuclidean:
    def test_three_four_five(self):
        d = euclidean_distances(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]]))
        assert d.data[0, 0] == pytest.approx(5.0)

    def test_identical_vectors(self):
        v = np.array([[1.0, 2.0, 3.0]])
        assert euclidean_distances(v, v).data[0, 0] == pytest.approx(0.0, abs=1e-9)

    def test_random_vs_per_pair_loop(self):
        rng = np.random.default_rng(3)
        q, g = rng.standard_normal((5, 8)), rng.standard_normal((7, 8))
        got = euclidean_distances(q, g).data
        assert np.max(np.abs(got - pairwise_euclidean_loop(q, g))) <= 1e-9

    def test_symmetry_and_triangle_inequality(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((6, 4))
        d = euclidean_distances(x, x).data
        np.testing.assert_allclose(d, d.T, atol=1e-9)
        for i in range(6):
            for j in range(6):
                for k in range(6):
                    assert d[i, j] <= d[i, k] + d[k, j] + 1e-9

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            euclidean_distances(np.zeros((2, 3)), np.zeros((2, 4)))


class TestCosine:
    def test_parallel(self):
        d = cosine_distances(np.array([[1.0, 0.0]]), np.array([[2.0, 0.0]]))
        assert d.data[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal(self):
        d = cosine_distances(np.array([[1.0, 0.0]]), np.array([[0.0, 5.0]]))
        assert d.data[0, 0] == pytest.approx(1.0)

    def test_random_vs_normalized_dot_oracle(self):
        rng = np.random.default_rng(7)
        q, g = rng.standard_normal((4, 6)), rng.standard_normal((5, 6))
        np.testing.assert_allclose(
            cosine_distances(q, g).data, pairwise_cosine_loop(q, g), atol=1e-12
        )

    def test_scale_invariance(self):
        rng = np.random.default_rng(9)
        q, g = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
        base = cosine_distances(q, g).data
        scaled = cosine_distances(q * 7.0, g * 0.01).data
        np.testing.assert_allclose(base, scaled, atol=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            cosine_distances(np.zeros((1, 3)), np.ones((1, 3)))


class TestDsr:
    def test_self_match(self):
        cols = np.array([[1.0, 0.0], [0.0, 1.0]])  # two unit columns
        x = SpatialFeatureSet(cols)
        score, normed = dsr_score(x, x)
        assert score == pytest.approx(2.0, abs=1e-12)
        assert normed == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_single_column(self):
        x = SpatialFeatureSet(np.array([[1.0], [0.0]]))
        y = SpatialFeatureSet(np.array([[0.0, 0.0], [1.0, -1.0]]))
        score, _ = dsr_score(x, y)
        assert score == pytest.approx(0.0, abs=1e-12)

    def test_random_vs_exhaustive_argmax(self):
        rng = np.random.default_rng(11)
        x = SpatialFeatureSet(rng.standard_normal((4, 3)))
        y = SpatialFeatureSet(rng.standard_normal((4, 5)))
        score, normed = dsr_score(x, y)
        expected = 0.0
        for n in range(3):
            best = -np.inf
            for m in range(5):
                xc, yc = x.data[:, n], y.data[:, m]
                best = max(best, np.dot(xc, yc) / (np.linalg.norm(xc) * np.linalg.norm(yc)))
            expected += best
        assert score == pytest.approx(expected, abs=1e-12)
        assert normed == pytest.approx(expected / 3.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            dsr_score(SpatialFeatureSet(np.ones((3, 2))), SpatialFeatureSet(np.ones((4, 2))))


class TestQueryExpansion:
    def test_m_zero_unchanged(self):
        gal = np.random.default_rng(13).standard_normal((5, 3))
        q = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(query_expansion(q, gal, QeParams(m=0)), q)

    def test_two_term_average(self):
        q = np.array([1.0, 0.0])
        gal = np.array([[0.0, 1.0], [-1.0, -1.0]])
        out = query_expansion(q, gal, QeParams(m=1, metric="euclidean"))
        np.testing.assert_allclose(out, [0.5, 0.5])

    def test_sorted_selection_plus_mean_oracle(self):
        rng = np.random.default_rng(17)
        q = rng.standard_normal(4)
        gal = rng.standard_normal((9, 4))
        out = query_expansion(q, gal, QeParams(m=3, metric="cosine"))
        dists = pairwise_cosine_loop(q[None, :], gal)[0]
        picks = np.argsort(dists, kind="stable")[:3]
        expected = (q + gal[picks].sum(axis=0)) / 4.0
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_convex_hull_membership(self):
        rng = np.random.default_rng(19)
        for _ in range(50):
            q = rng.standard_normal(3)
            gal = rng.standard_normal((6, 3))
            m = int(rng.integers(0, 4))
            out = query_expansion(q, gal, QeParams(m=m, metric="euclidean"))
            dists = np.linalg.norm(gal - q, axis=1)
            picks = np.argsort(dists, kind="stable")[:m]
            pts = np.vstack([q[None, :], gal[picks]])
            weights = np.full(m + 1, 1.0 / (m + 1))
            np.testing.assert_allclose(out, weights @ pts, atol=1e-12)

    def test_embedding_type_round_trips(self):
        out = query_expansion(
            Embedding(np.array([1.0, 0.0])), np.array([[0.0, 1.0]]), QeParams(m=1)
        )
        assert isinstance(out, Embedding)

    def test_m_exceeding_gallery_rejected(self):
        with pytest.raises(ValueError):
            query_expansion(np.ones(2), np.ones((2, 2)), QeParams(m=3))


def two_cluster_embeddings(rng, per_cluster=20, spread=0.05, gap=10.0, dim=4):
    centers = np.zeros((2, dim))
    centers[1, 0] = gap
    points = []
    labels = []
    for c in range(2):
        for _ in range(per_cluster):
            points.append(centers[c] + spread * rng.standard_normal(dim))
            labels.append(c)
    return np.asarray(points), np.asarray(labels)


class TestKReciprocalRerank:
    def test_lambda_one_preserves_argsort(self):
        rng = np.random.default_rng(23)
        q, g = rng.standard_normal((6, 5)), rng.standard_normal((30, 5))
        base = euclidean_distances(q, g).data
        rr = k_reciprocal_rerank(q, g, RerankParams(k1=10, k2=4, lam=1.0))
        for i in range(6):
            np.testing.assert_array_equal(
                np.argsort(rr.data[i], kind="stable"), np.argsort(base[i], kind="stable")
            )

    def test_well_separated_clusters_rank1(self):
        rng = np.random.default_rng(29)
        points, labels = two_cluster_embeddings(rng)
        q, g = points[::5], np.delete(points, slice(None, None, 5), axis=0)
        ql = labels[::5]
        gl = np.delete(labels, slice(None, None, 5))
        rr = k_reciprocal_rerank(q, g, RerankParams(k1=10, k2=4, lam=0.3))
        top1 = np.argmin(rr.data, axis=1)
        assert np.all(gl[top1] == ql)

    def test_matches_reference_transcription(self):
        rng = np.random.default_rng(31)
        q = rng.standard_normal((4, 6))
        g = rng.standard_normal((6, 6))
        got = k_reciprocal_rerank(q, g, RerankParams(k1=5, k2=3, lam=0.3)).data
        all_pts = np.vstack([q, g])
        full = pairwise_euclidean_loop(all_pts, all_pts)
        expected = rerank_reference(
            full[:4, 4:], full[:4, :4], full[4:, 4:], k1=5, k2=3, lambda_value=0.3
        )
        np.testing.assert_allclose(got, expected, atol=1e-10)

    def test_matches_reference_on_cosine_metric(self):
        rng = np.random.default_rng(37)
        q = rng.standard_normal((5, 4))
        g = rng.standard_normal((9, 4))
        got = k_reciprocal_rerank(q, g, RerankParams(k1=7, k2=2, lam=0.5), metric="cosine").data
        all_pts = np.vstack([q, g])
        full = pairwise_cosine_loop(all_pts, all_pts)
        expected = rerank_reference(
            full[:5, 5:], full[:5, :5], full[5:, 5:], k1=7, k2=2, lambda_value=0.5
        )
        np.testing.assert_allclose(got, expected, atol=1e-10)

    def test_k2_one_skips_local_expansion(self):
        rng = np.random.default_rng(41)
        q, g = rng.standard_normal((3, 4)), rng.standard_normal((8, 4))
        got = k_reciprocal_rerank(q, g, RerankParams(k1=5, k2=1, lam=0.2)).data
        all_pts = np.vstack([q, g])
        full = pairwise_euclidean_loop(all_pts, all_pts)
        expected = rerank_reference(
            full[:3, 3:], full[:3, :3], full[3:, 3:], k1=5, k2=1, lambda_value=0.2
        )
        np.testing.assert_allclose(got, expected, atol=1e-10)

    def test_too_small_pool_rejected(self):
        with pytest.raises(ValueError):
            k_reciprocal_rerank(np.ones((2, 3)), np.ones((3, 3)), RerankParams(k1=20))

    def test_param_validation(self):
        with pytest.raises(ValueError):
            RerankParams(k1=5, k2=6)
        with pytest.raises(ValueError):
            RerankParams(lam=1.5)


class TestRankLists:
    def test_simple_row(self):
        d = DistanceMatrix(np.array([[3.0, 1.0, 2.0]]), metric_name="euclidean")
        np.testing.assert_array_equal(rank_lists(d)[0], [1, 2, 0])

    def test_tie_rule_identity_permutation(self):
        d = DistanceMatrix(np.ones((1, 5)), metric_name="euclidean")
        np.testing.assert_array_equal(rank_lists(d)[0], np.arange(5))

    def test_random_vs_stable_sort_oracle(self):
        rng = np.random.default_rng(43)
        data = rng.random((4, 10))
        d = DistanceMatrix(data, metric_name="euclidean")
        perms = rank_lists(d)
        for i in range(4):
            expected = sorted(range(10), key=lambda j: (data[i, j], j))
            np.testing.assert_array_equal(perms[i], expected)
