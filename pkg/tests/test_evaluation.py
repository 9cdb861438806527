"""Unit tests for ranking metrics and run comparison statistics."""

import numpy as np
import pytest

from bug_localizer.composer import RankedList
from bug_localizer.errors import EmptySample, EmptyTruth, LengthMismatch, ZeroVariance
from bug_localizer.evaluation import (
    aggregate,
    average_precision,
    evaluate_ranking,
    evaluate_rankings,
    first_relevant_rank,
    ks_test,
    paired_ttest,
)


def ranked(bug_id, *paths):
    """Ranking in the given order with descending scores."""
    return RankedList(bug_id, tuple((path, float(len(paths) - i)) for i, path in enumerate(paths)))


class TestAveragePrecision:
    """Test per-bug AP."""

    def test_two_relevant(self):
        """Test relevant files at ranks 1 and 3."""
        assert average_precision(ranked("B-1", "a", "b", "c", "d"), {"a", "c"}) == pytest.approx(5 / 6)

    def test_missing_relevant_file(self):
        """Test that relevant files outside the ranking still count."""
        assert average_precision(ranked("B-1", "a", "b"), {"a", "z"}) == pytest.approx(0.5)

    def test_no_relevant_file(self):
        """Test AP 0 when nothing relevant is ranked."""
        assert average_precision(ranked("B-1", "a", "b"), {"z"}) == 0.0

    def test_empty_truth(self):
        """Test that AP without ground truth is refused."""
        with pytest.raises(EmptyTruth):
            average_precision(ranked("B-1", "a"), set())

    def test_random_rankings_oracle(self):
        """Test 200 random rankings against sum of precision at relevant positions."""
        rng = np.random.default_rng(2024)
        files = [f"f{i}.java" for i in range(30)]

        for _ in range(200):
            order = list(rng.permutation(files))
            truth = set(rng.choice(files, size=int(rng.integers(1, 8)), replace=False))
            ranking = ranked("B-1", *order[: int(rng.integers(1, 31))])

            precisions = []
            for position, path in enumerate(ranking.paths, 1):
                if path in truth:
                    relevant_so_far = len(truth & set(ranking.paths[:position]))
                    precisions.append(relevant_so_far / position)
            expected = sum(precisions) / len(truth)

            assert average_precision(ranking, truth) == pytest.approx(expected, abs=1e-12)
            assert 0.0 <= average_precision(ranking, truth) <= 1.0


class TestFirstRelevantRank:
    """Test the rank behind MRR and Top-k."""

    def test_rank(self):
        """Test one-based ranks."""
        assert first_relevant_rank(ranked("B-1", "a", "b", "c"), {"c", "b"}) == 2

    def test_absent(self):
        """Test None when no relevant file is ranked."""
        assert first_relevant_rank(ranked("B-1", "a"), {"z"}) is None


class TestAggregate:
    """Test project-level metrics."""

    def test_metrics(self):
        """Test MAP, MRR and Top-k over three bugs, one without a hit."""
        results = [
            evaluate_ranking(ranked("B-1", "a", "b", "c", "d", "e", "f"), {"d"}),
            evaluate_ranking(ranked("B-2", "x", "y"), {"z"}),
            evaluate_ranking(ranked("B-3", "a", "b"), {"a"}),
        ]

        report = aggregate(results, "DEMO")

        assert report.aggregates["MAP"] == pytest.approx((0.25 + 0.0 + 1.0) / 3)
        assert report.aggregates["MRR"] == pytest.approx((0.25 + 1.0) / 2)
        assert report.aggregates["Top1"] == pytest.approx(1 / 3)
        assert report.aggregates["Top5"] == pytest.approx(2 / 3)
        assert report.aggregates["Top10"] == pytest.approx(2 / 3)
        assert report.mrr_excluded == 1
        assert report.bug_count == 3

    def test_single_bug_mrr(self):
        """Test MRR 0.25 for a first hit at rank 4."""
        report = aggregate([evaluate_ranking(ranked("B-1", "a", "b", "c", "d"), {"d"})])

        assert report.aggregates["MRR"] == pytest.approx(0.25)

    def test_top_k_monotone(self):
        """Test Top1 <= Top5 <= Top10 over random evaluations."""
        rng = np.random.default_rng(8)
        files = [f"f{i}.java" for i in range(20)]

        for _ in range(50):
            results = [
                evaluate_ranking(ranked(f"B-{n}", *rng.permutation(files)), set(rng.choice(files, size=2, replace=False)))
                for n in range(6)
            ]
            report = aggregate(results)
            assert report.aggregates["Top1"] <= report.aggregates["Top5"] <= report.aggregates["Top10"]

    def test_empty(self):
        """Test that no evaluated bug is refused."""
        with pytest.raises(EmptySample):
            aggregate([])

    def test_skips_empty_truth(self):
        """Test that bugs without ground truth are listed, not scored."""
        rankings = {"B-1": ranked("B-1", "a", "b"), "B-2": ranked("B-2", "a")}

        report = evaluate_rankings(rankings, {"B-1": {"b"}, "B-2": set()}, "DEMO")

        assert report.skipped_bugs == ("B-2",)
        assert report.aggregates["MAP"] == pytest.approx(0.5)

    def test_to_dict(self):
        """Test the serialized report shape."""
        report = aggregate([evaluate_ranking(ranked("B-1", "a"), {"a"})], "DEMO")

        data = report.to_dict()

        assert data["project"] == "DEMO"
        assert data["per_bug"][0]["reciprocal_rank"] == 1.0
        assert set(data["aggregates"]) == {"MAP", "MRR", "Top1", "Top5", "Top10"}


class TestPairedTTest:
    """Test the paired t-test."""

    def test_known_values(self):
        """Test differences 1, 2, 3."""
        result = paired_ttest([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])

        assert result.statistic == pytest.approx(3.464, abs=1e-3)
        assert result.pvalue == pytest.approx(0.0742, abs=1e-3)

    def test_zero_variance(self):
        """Test that constant differences are refused."""
        with pytest.raises(ZeroVariance):
            paired_ttest([0.5, 0.6, 0.7], [0.5, 0.6, 0.7])

    def test_length_mismatch(self):
        """Test that unpaired samples are refused."""
        with pytest.raises(LengthMismatch):
            paired_ttest([1.0, 2.0, 3.0], [1.0, 2.0])

    def test_too_few_pairs(self):
        """Test that two pairs are not enough."""
        with pytest.raises(LengthMismatch):
            paired_ttest([1.0, 2.0], [0.0, 0.5])


class TestKSTest:
    """Test the two-sample Kolmogorov-Smirnov test."""

    def test_identical(self):
        """Test D 0 and p 1 for identical samples."""
        result = ks_test([0.1, 0.2, 0.3], [0.1, 0.2, 0.3])

        assert result.statistic == 0.0
        assert result.pvalue == pytest.approx(1.0)

    def test_disjoint(self):
        """Test D 1 for separated samples."""
        assert ks_test([0.0, 1.0, 2.0], [5.0, 6.0, 7.0]).statistic == pytest.approx(1.0)

    def test_unequal_sizes(self):
        """Test D and the asymptotic p-value for samples of 11 and 16."""
        a = np.arange(11) / 10
        b = np.concatenate([np.full(7, -1.0), np.linspace(0.0, 1.0, 9)])

        result = ks_test(a, b)

        assert result.statistic == pytest.approx(0.4375)
        # asymptotic Kolmogorov distribution; the exact small-sample p-value is 0.124
        assert result.pvalue == pytest.approx(0.165, abs=5e-3)

    def test_symmetric(self):
        """Test that swapping the samples changes nothing."""
        rng = np.random.default_rng(3)
        a = rng.normal(size=12)
        b = rng.normal(0.5, size=9)

        assert ks_test(a, b) == pytest.approx(ks_test(b, a))

    def test_empty(self):
        """Test that an empty sample is refused."""
        with pytest.raises(EmptySample):
            ks_test([], [1.0])
