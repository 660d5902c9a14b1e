import itertools

import numpy as np
import pytest

from oracles import rank_metrics_reference
from reidkit.core import DistanceMatrix, ItemMeta
from reidkit.metrics import EvalProtocol, evaluate, roc_curve


def single_query_setup(match_flags, distances=None):
    """One query against a gallery ordered by the given distances."""
    n = len(match_flags)
    if distances is None:
        distances = np.arange(1, n + 1, dtype=np.float64)
    qmeta = [ItemMeta("q0", 0, 0)]
    gmeta = [
        ItemMeta(f"g{i}", 0 if flag else i + 1, 1) for i, flag in enumerate(match_flags)
    ]
    dist = DistanceMatrix(np.asarray(distances, dtype=np.float64)[None, :], "euclidean")
    return dist, qmeta, gmeta


class TestEvaluateHandCases:
    def test_positives_at_ranks_one_and_three(self):
        dist, qmeta, gmeta = single_query_setup([True, False, True, False])
        report = evaluate(dist, qmeta, gmeta, EvalProtocol(max_rank=4))
        assert report.mean_ap == pytest.approx((1.0 + 2.0 / 3.0) / 2.0)
        assert report.mean_ap == pytest.approx(5.0 / 6.0)
        assert report.mean_inp == pytest.approx(2.0 / 3.0)
        np.testing.assert_allclose(report.cmc, [1.0, 1.0, 1.0, 1.0])

    def test_perfect_retrieval(self):
        dist, qmeta, gmeta = single_query_setup([True, True, False, False])
        report = evaluate(dist, qmeta, gmeta, EvalProtocol(max_rank=4))
        assert report.mean_ap == 1.0
        assert report.mean_inp == 1.0
        assert all(v == 1.0 for v in report.cmc)

    def test_three_queries_hand_built(self):
        # 3 queries x 6 gallery items; identities: queries 0,1,2; gallery as below
        qmeta = [ItemMeta(f"q{i}", i, 0) for i in range(3)]
        g_pids = [0, 0, 1, 1, 2, 9]
        gmeta = [ItemMeta(f"g{j}", p, 1) for j, p in enumerate(g_pids)]
        rng = np.random.default_rng(5)
        data = rng.random((3, 6))
        dist = DistanceMatrix(data, "euclidean")
        report = evaluate(dist, qmeta, gmeta, EvalProtocol(max_rank=6))
        aps, inps, firsts = [], [], []
        for qi in range(3):
            order = np.argsort(data[qi], kind="stable")
            flags = [g_pids[j] == qi for j in order]
            ap, inp, first = rank_metrics_reference(flags)
            aps.append(ap)
            inps.append(inp)
            firsts.append(first)
        assert report.mean_ap == pytest.approx(np.mean(aps), abs=1e-12)
        assert report.mean_inp == pytest.approx(np.mean(inps), abs=1e-12)
        for k in range(1, 7):
            expected = np.mean([f <= k for f in firsts])
            assert report.cmc[k - 1] == pytest.approx(expected, abs=1e-12)


class TestEvaluateExhaustive:
    def test_all_gallery_permutations_up_to_seven(self):
        # every ordering of every gallery size; one canonical positive mask per size
        for n in range(1, 8):
            num_pos = max(1, n // 3)
            base_flags = [i < num_pos for i in range(n)]
            for perm in itertools.permutations(range(n)):
                flags = [base_flags[p] for p in perm]
                distances = np.arange(1, n + 1, dtype=np.float64)
                dist, qmeta, gmeta = single_query_setup(flags, distances)
                report = evaluate(dist, qmeta, gmeta, EvalProtocol(max_rank=n))
                ap, inp, first = rank_metrics_reference(flags)
                assert report.mean_ap == ap
                assert report.mean_inp == inp
                for k in range(1, n + 1):
                    assert report.cmc[k - 1] == (1.0 if first <= k else 0.0)

    def test_all_positive_masks_small_galleries(self):
        for n in range(1, 6):
            for mask_bits in range(1, 2**n):
                flags = [(mask_bits >> i) & 1 == 1 for i in range(n)]
                dist, qmeta, gmeta = single_query_setup(flags)
                report = evaluate(dist, qmeta, gmeta, EvalProtocol(max_rank=n))
                ap, inp, _ = rank_metrics_reference(flags)
                assert report.mean_ap == pytest.approx(ap, abs=1e-15)
                assert report.mean_inp == pytest.approx(inp, abs=1e-15)


class TestProtocol:
    def test_same_camera_same_id_exclusion(self):
        qmeta = [ItemMeta("q0", 0, 0)]
        gmeta = [
            ItemMeta("g0", 0, 0),  # same id, same camera: dropped
            ItemMeta("g1", 0, 1),  # same id, other camera: kept
            ItemMeta("g2", 1, 0),
        ]
        dist = DistanceMatrix(np.array([[0.1, 0.5, 0.3]]), "euclidean")
        report = evaluate(dist, qmeta, gmeta, EvalProtocol(max_rank=2))
        # after exclusion the ranking is [g2, g1]; positive at rank 2
        assert report.cmc[0] == 0.0
        assert report.cmc[1] == 1.0
        assert report.mean_ap == pytest.approx(0.5)

        off = evaluate(
            dist, qmeta, gmeta, EvalProtocol(exclude_same_camera_same_id=False, max_rank=3)
        )
        assert off.cmc[0] == 1.0

    def test_query_without_positives_excluded_with_count(self):
        qmeta = [ItemMeta("q0", 0, 0), ItemMeta("q1", 5, 0)]
        gmeta = [ItemMeta("g0", 0, 1), ItemMeta("g1", 1, 1)]
        dist = DistanceMatrix(np.array([[0.1, 0.2], [0.3, 0.4]]), "euclidean")
        report = evaluate(dist, qmeta, gmeta, EvalProtocol(max_rank=2))
        assert report.num_queries == 1
        assert report.num_excluded == 1
        assert report.mean_ap == 1.0

    def test_all_queries_excluded_is_an_error(self):
        qmeta = [ItemMeta("q0", 7, 0)]
        gmeta = [ItemMeta("g0", 0, 1)]
        dist = DistanceMatrix(np.array([[0.5]]), "euclidean")
        with pytest.raises(ValueError, match="no query"):
            evaluate(dist, qmeta, gmeta)

    def test_metadata_length_mismatch(self):
        dist = DistanceMatrix(np.ones((1, 2)), "euclidean")
        with pytest.raises(ValueError):
            evaluate(dist, [ItemMeta("q", 0, 0)], [ItemMeta("g", 0, 1)])


class TestRankInvariance:
    def test_monotone_transform_leaves_rank_metrics_unchanged(self):
        rng = np.random.default_rng(11)
        qmeta = [ItemMeta(f"q{i}", i % 3, 0) for i in range(4)]
        gmeta = [ItemMeta(f"g{j}", j % 3, 1) for j in range(9)]
        data = rng.random((4, 9))
        proto = EvalProtocol(max_rank=9)
        base = evaluate(DistanceMatrix(data, "euclidean"), qmeta, gmeta, proto)
        warped = evaluate(
            DistanceMatrix(np.exp(3.0 * data) - 0.9, "euclidean"), qmeta, gmeta, proto
        )
        assert warped.mean_ap == pytest.approx(base.mean_ap, abs=1e-12)
        assert warped.mean_inp == pytest.approx(base.mean_inp, abs=1e-12)
        np.testing.assert_allclose(warped.cmc, base.cmc, atol=1e-12)

    def test_cmc_nondecreasing_and_bounded(self):
        rng = np.random.default_rng(13)
        qmeta = [ItemMeta(f"q{i}", i % 4, 0) for i in range(6)]
        gmeta = [ItemMeta(f"g{j}", j % 4, 1) for j in range(12)]
        report = evaluate(
            DistanceMatrix(rng.random((6, 12)), "euclidean"), qmeta, gmeta, EvalProtocol(max_rank=12)
        )
        cmc = np.asarray(report.cmc)
        assert np.all(np.diff(cmc) >= 0)
        assert cmc.min() >= 0.0 and cmc.max() <= 1.0
        assert 0.0 <= report.mean_ap <= 1.0
        assert 0.0 <= report.mean_inp <= 1.0
        assert 0.0 <= report.auc <= 1.0

    def test_inp_ap_relation_brute_force(self):
        # Brute force over every ordering up to size 7: INP equals the
        # precision at the hardest positive, both live in (0, 1], and they
        # coincide at 1 exactly when the positives form a perfect prefix.
        # INP <= AP does NOT hold in general: positives at ranks {2, 3} of 3
        # give INP = 2/3 > AP = 7/12, so only the true relations are asserted.
        ap, inp, _ = rank_metrics_reference([False, True, True])
        assert inp > ap  # the refuting ordering, kept as a regression anchor
        for n in range(2, 8):
            for mask_bits in range(1, 2**n):
                flags = [(mask_bits >> i) & 1 == 1 for i in range(n)]
                ap, inp, first = rank_metrics_reference(flags)
                hits = sum(flags)
                last = max(i + 1 for i, f in enumerate(flags) if f)
                assert inp == pytest.approx(hits / last, abs=0)
                assert 0.0 < inp <= 1.0 and 0.0 < ap <= 1.0
                prefix_perfect = all(flags[: hits])
                assert (ap == 1.0 and inp == 1.0) == prefix_perfect


class TestRocCurve:
    def test_perfectly_separated(self):
        points, auc = roc_curve([0.1, 0.2, 0.3], [0.5, 0.6, 0.9])
        assert auc == pytest.approx(1.0)
        assert points[0] == (0.0, 0.0)
        assert points[-1] == (1.0, 1.0)

    def test_identical_distributions_chance_level(self):
        rng = np.random.default_rng(17)
        pool = rng.random(2000)
        _, auc = roc_curve(pool[:1000], pool[1000:])
        assert auc == pytest.approx(0.5, abs=0.05)

    def test_hand_case_auc_three_quarters(self):
        points, auc = roc_curve([0.1, 0.4], [0.3, 0.9])
        assert auc == pytest.approx(0.75)

    def test_curve_monotone_in_both_coordinates(self):
        rng = np.random.default_rng(19)
        points, _ = roc_curve(rng.random(50), rng.random(80) + 0.2)
        fars = [p[0] for p in points]
        tars = [p[1] for p in points]
        assert all(a <= b for a, b in zip(fars, fars[1:]))
        assert all(a <= b for a, b in zip(tars, tars[1:]))

    def test_pair_comparison_oracle(self):
        # AUC equals P(same < diff) + 0.5 P(same == diff) over all pairs
        rng = np.random.default_rng(23)
        same = rng.integers(0, 10, size=30) / 10.0
        diff = rng.integers(0, 10, size=40) / 10.0
        _, auc = roc_curve(same, diff)
        wins = sum((s < d) + 0.5 * (s == d) for s in same for d in diff)
        assert auc == pytest.approx(wins / (30 * 40), abs=1e-12)

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            roc_curve([], [0.1])
        with pytest.raises(ValueError):
            roc_curve([0.1], [])
