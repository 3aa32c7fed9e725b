"""Index retrieval and evaluation metrics against brute-force oracles."""

import hashlib

import numpy as np
import pytest

from lidarplace.retrieval import (DescriptorIndex, pr_curve_max_f1_auc,
                                  query_topk, recall_at_k)


def unit_rows(rng, n, d):
    m = rng.standard_normal((n, d))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def make_index(rng, n=50, d=8, span=100.0):
    return DescriptorIndex([f"f{i:03d}" for i in range(n)],
                           unit_rows(rng, n, d),
                           rng.uniform(-span, span, (n, 2)))


class TestQueryTopk:
    def test_exact_match_ranks_first(self, rng):
        idx = make_index(rng)
        out = query_topk(idx, idx.descriptors[17], 3)
        assert out[0][0] == "f017"
        assert out[0][1] == 0.0

    def test_k_beyond_size_returns_full_ranking(self, rng):
        idx = make_index(rng, n=10)
        out = query_topk(idx, unit_rows(rng, 1, 8)[0], 99)
        assert len(out) == 10
        dists = [d for _, d in out]
        assert dists == sorted(dists)

    def test_matches_full_sort_oracle(self, rng):
        for _ in range(100):
            n = int(rng.integers(5, 60))
            idx = make_index(rng, n=n)
            q = unit_rows(rng, 1, 8)[0]
            got = query_topk(idx, q, 10)
            dist = np.linalg.norm(idx.descriptors - q, axis=1)
            ref = sorted(zip(dist, idx.frame_ids))[:10]
            assert [fid for _, fid in ref] == [fid for fid, _ in got]
            np.testing.assert_allclose([d for d, _ in ref], [d for _, d in got])

    def test_empty_index_rejected(self):
        idx = DescriptorIndex([], np.zeros((0, 4)), np.zeros((0, 2)))
        with pytest.raises(ValueError):
            query_topk(idx, np.zeros(4), 1)

    def test_duplicate_ids_rejected(self, rng):
        with pytest.raises(ValueError):
            DescriptorIndex(["a", "a"], unit_rows(rng, 2, 4), np.zeros((2, 2)))


class TestRecallAtK:
    def test_identical_descriptors_give_full_recall(self, rng):
        idx = make_index(rng, n=30)
        queries = [(idx.descriptors[i], idx.positions[i]) for i in range(10)]
        recalls, excluded = recall_at_k(idx, queries, (1, 5))
        assert recalls[1] == 1.0 and recalls[5] == 1.0
        assert excluded == 0

    def test_monotone_in_k(self, rng):
        idx = make_index(rng, n=40, span=20.0)
        queries = [(unit_rows(rng, 1, 8)[0], rng.uniform(-20, 20, 2))
                   for _ in range(25)]
        recalls, _ = recall_at_k(idx, queries, (1, 2, 5, 10, 40))
        vals = [recalls[k] for k in (1, 2, 5, 10, 40)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))
        assert recalls[40] == 1.0  # full ranking always contains the revisit

    def test_random_descriptors_match_expected_rate(self, rng):
        """With descriptors independent of position, recall@1 estimates the
        mean in-radius fraction of the database (Monte Carlo oracle)."""
        n = 400
        idx = make_index(rng, n=n, span=30.0)
        queries = []
        for _ in range(600):
            queries.append((unit_rows(rng, 1, 8)[0], rng.uniform(-30, 30, 2)))
        recalls, excluded = recall_at_k(idx, queries, (1,), pos_radius=9.0)
        # expected hit rate: average in-radius share among scored queries
        shares = []
        for desc, pos in queries:
            d = np.linalg.norm(idx.positions - pos, axis=1)
            share = np.mean(d <= 9.0)
            if share > 0:
                shares.append(share)
        expected = float(np.mean(shares))
        assert abs(recalls[1] - expected) < 0.05

    def test_unscorable_queries_counted_separately(self, rng):
        idx = make_index(rng, n=5, span=1.0)
        far = (unit_rows(rng, 1, 8)[0], np.array([500.0, 500.0]))
        near = (idx.descriptors[0], idx.positions[0])
        recalls, excluded = recall_at_k(idx, [far, near], (1,))
        assert excluded == 1
        assert recalls[1] == 1.0

    def test_empty_queries_rejected(self, rng):
        with pytest.raises(ValueError):
            recall_at_k(make_index(rng), [], (1,))


class TestPrCurve:
    @staticmethod
    def at_distance(anchor, dist):
        """Unit vector at a chosen Euclidean distance from a unit anchor."""
        other = np.zeros_like(anchor)
        other[np.argmin(np.abs(anchor))] = 1.0
        # rotate in the (anchor, other) plane: ||a - (a cos t + o sin t)|| = dist
        t = 2.0 * np.arcsin(dist / 2.0)
        return anchor * np.cos(t) + other * np.sin(t)

    def test_perfect_separation(self):
        """True matches at distance 0.1, false ones at 0.9: the threshold
        between them yields precision = recall = 1."""
        d = 8
        e0 = np.zeros(d); e0[0] = 1.0
        idx = DescriptorIndex(["a"], e0[None, :], np.array([[0.0, 0.0]]))
        queries = [(self.at_distance(e0, 0.1), np.array([1.0, 0.0]))
                   for _ in range(3)]
        queries += [(self.at_distance(e0, 0.9), np.array([900.0, 900.0]))
                    for _ in range(2)]
        report = pr_curve_max_f1_auc(idx, queries)
        assert report.max_f1 == 1.0
        assert report.pr_auc == 1.0

    def test_all_top1_wrong_gives_zero_f1(self):
        """Every query has a revisit available but retrieves the far
        entry: no threshold produces a true positive."""
        d = 8
        e0 = np.zeros(d); e0[0] = 1.0
        e1 = np.zeros(d); e1[1] = 1.0
        idx = DescriptorIndex(["near", "far"], np.stack([e0, e1]),
                              np.array([[0.0, 0.0], [500.0, 0.0]]))
        queries = [(self.at_distance(e1, 0.2), np.array([1.0, 0.0]))
                   for _ in range(4)]
        report = pr_curve_max_f1_auc(idx, queries)
        assert report.max_f1 == 0.0

    def test_no_revisits_rejected(self, rng):
        idx = make_index(rng, n=5, span=1.0)
        queries = [(unit_rows(rng, 1, 8)[0], np.array([900.0, 900.0]))]
        with pytest.raises(ValueError):
            pr_curve_max_f1_auc(idx, queries)

    def test_hand_built_scenario_matches_enumeration(self):
        """10 queries with hand-chosen top-1 distances and correctness;
        every threshold's confusion matrix enumerated by hand below."""
        d = 8
        e0 = np.zeros(d); e0[0] = 1.0
        idx = DescriptorIndex(["a"], e0[None, :], np.array([[0.0, 0.0]]))
        spec = [
            # (top1 distance, revisit?)  top-1 is always entry "a"
            (0.10, True), (0.20, True), (0.30, True), (0.40, True), (0.50, True),
            (0.15, False), (0.60, False), (0.70, True), (0.80, False), (0.90, True),
        ]
        queries = []
        achieved = []  # the exact float distances the index will observe
        for dist, revisit in spec:
            q = self.at_distance(e0, dist)
            pos = np.array([1.0, 0.0]) if revisit else np.array([800.0, 0.0])
            queries.append((q, pos))
            achieved.append(float(np.linalg.norm(q - e0)))
        report = pr_curve_max_f1_auc(idx, queries)

        flags = [r for _, r in spec]
        n_rev = sum(flags)

        def confusion(tau):
            tp = sum(1 for dd, r in zip(achieved, flags) if dd < tau and r)
            fp = sum(1 for dd, r in zip(achieved, flags) if dd < tau and not r)
            p = tp / (tp + fp) if tp + fp else 1.0
            return p, tp / n_rev

        for tau, (prec, rec) in zip(report.taus, report.pr_points):
            exp_p, exp_r = confusion(tau)
            assert abs(prec - exp_p) < 1e-12
            assert abs(rec - exp_r) < 1e-12
        f1s = []
        for tau in report.taus:
            p, r = confusion(tau)
            f1s.append(2 * p * r / (p + r) if p + r else 0.0)
        assert abs(report.max_f1 - max(f1s)) < 1e-12

    def test_metrics_in_unit_interval(self, rng):
        idx = make_index(rng, n=40, span=15.0)
        queries = [(unit_rows(rng, 1, 8)[0], rng.uniform(-15, 15, 2))
                   for _ in range(30)]
        report = pr_curve_max_f1_auc(idx, queries)
        assert 0.0 <= report.max_f1 <= 1.0
        assert 0.0 <= report.pr_auc <= 1.0
        for p, r in report.pr_points:
            assert 0.0 <= p <= 1.0 and 0.0 <= r <= 1.0


class TestIndexImmutability:
    def test_evaluation_never_mutates_descriptors(self, rng):
        idx = make_index(rng, n=30, span=15.0)
        before = hashlib.sha256(idx.descriptors.tobytes()).hexdigest()
        queries = [(unit_rows(rng, 1, 8)[0], rng.uniform(-15, 15, 2))
                   for _ in range(10)]
        pr_curve_max_f1_auc(idx, queries)
        recall_at_k(idx, queries, (1, 5))
        query_topk(idx, queries[0][0], 5)
        assert hashlib.sha256(idx.descriptors.tobytes()).hexdigest() == before

    def test_descriptor_array_is_readonly(self, rng):
        idx = make_index(rng)
        with pytest.raises(ValueError):
            idx.descriptors[0, 0] = 5.0
