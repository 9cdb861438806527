"""
Ranking metrics and run comparison statistics.

MAP, MRR and Top-k over per-bug rankings, plus the paired t-test and the
two-sample Kolmogorov-Smirnov test used to compare runs across projects.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from bug_localizer.composer import RankedList
from bug_localizer.errors import EmptySample, EmptyTruth, LengthMismatch, ZeroVariance

TOP_K = (1, 5, 10)
METRICS = ("MAP", "MRR", "Top1", "Top5", "Top10")


class StatResult(NamedTuple):
    statistic: float
    pvalue: float


@dataclass(frozen=True)
class BugResult:
    bug_id: str
    average_precision: float
    first_rank: Optional[int]
    truth_size: int
    candidates: int

    @property
    def reciprocal_rank(self) -> float:
        return 1.0 / self.first_rank if self.first_rank else 0.0


@dataclass
class MetricsReport:
    """
    Aggregated metrics of one ranking method on one project.

    Attributes
    ----------
    aggregates : dict
        MAP, MRR, Top1, Top5, Top10, each in [0, 1].
    skipped_bugs : tuple of str
        Bugs left out because their ground truth was empty.
    mrr_excluded : int
        Evaluated bugs whose ranking holds no relevant file; they count in
        MAP and Top-k but not in MRR.
    """

    project: str
    per_bug: Tuple[BugResult, ...]
    aggregates: Dict[str, float]
    skipped_bugs: Tuple[str, ...] = ()
    mrr_excluded: int = 0

    @property
    def bug_count(self) -> int:
        return len(self.per_bug)

    def to_dict(self) -> Dict:
        return {
            "project": self.project,
            "bug_count": self.bug_count,
            "aggregates": dict(self.aggregates),
            "skipped_bugs": list(self.skipped_bugs),
            "mrr_excluded": self.mrr_excluded,
            "per_bug": [
                {
                    "bug_id": r.bug_id,
                    "average_precision": r.average_precision,
                    "reciprocal_rank": r.reciprocal_rank,
                    "first_rank": r.first_rank,
                    "truth_size": r.truth_size,
                    "candidates": r.candidates,
                }
                for r in self.per_bug
            ],
        }


def first_relevant_rank(ranking: RankedList, truth: Iterable[str]) -> Optional[int]:
    truth = set(truth)
    for rank, path in enumerate(ranking.paths, 1):
        if path in truth:
            return rank
    return None


def average_precision(ranking: RankedList, truth: Iterable[str]) -> float:
    """
    Mean of precision-at-i over the positions i holding a buggy file.

    Buggy files missing from the ranking still count in the denominator.

    Raises
    ------
    EmptyTruth
        If ``truth`` is empty.
    """
    truth = set(truth)
    if not truth:
        raise EmptyTruth(f"Average precision of {ranking.bug_id} is undefined without ground truth")
    hits = 0
    total = 0.0
    for position, path in enumerate(ranking.paths, 1):
        if path in truth:
            hits += 1
            total += hits / position
    return total / len(truth)


def evaluate_ranking(ranking: RankedList, truth: Iterable[str]) -> BugResult:
    truth = set(truth)
    return BugResult(
        bug_id=ranking.bug_id,
        average_precision=average_precision(ranking, truth),
        first_rank=first_relevant_rank(ranking, truth),
        truth_size=len(truth),
        candidates=len(ranking),
    )


def aggregate(
    results: Iterable[BugResult],
    project: str = "",
    skipped_bugs: Sequence[str] = (),
) -> MetricsReport:
    """
    Combine per-bug results.

    MAP is the mean AP. MRR averages 1/rank of the first relevant file over
    bugs whose ranking holds one. Top-k is the fraction of bugs with a
    relevant file at rank <= k.

    Raises
    ------
    EmptySample
        If there is no evaluated bug.
    """
    per_bug = tuple(sorted(results, key=lambda r: r.bug_id))
    if not per_bug:
        raise EmptySample(f"No evaluated bugs for project {project!r}")
    found = [r for r in per_bug if r.first_rank is not None]
    aggregates = {
        "MAP": float(np.mean([r.average_precision for r in per_bug])),
        "MRR": float(np.mean([r.reciprocal_rank for r in found])) if found else 0.0,
    }
    for k in TOP_K:
        aggregates[f"Top{k}"] = sum(1 for r in found if r.first_rank <= k) / len(per_bug)  # type: ignore[operator]
    return MetricsReport(
        project=project,
        per_bug=per_bug,
        aggregates=aggregates,
        skipped_bugs=tuple(sorted(skipped_bugs)),
        mrr_excluded=len(per_bug) - len(found),
    )


def evaluate_rankings(
    rankings: Mapping[str, RankedList],
    truths: Mapping[str, Iterable[str]],
    project: str = "",
) -> MetricsReport:
    """Evaluate every ranked bug; bugs with empty ground truth are skipped and listed."""
    results: List[BugResult] = []
    skipped: List[str] = []
    for bug_id in sorted(rankings):
        truth = set(truths.get(bug_id, ()))
        if not truth:
            skipped.append(bug_id)
            continue
        results.append(evaluate_ranking(rankings[bug_id], truth))
    return aggregate(results, project, skipped)


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> StatResult:
    """
    Two-tailed paired t-test with ``n - 1`` degrees of freedom.

    Raises
    ------
    LengthMismatch
        If the samples differ in length or hold fewer than three pairs.
    ZeroVariance
        If every pairwise difference is the same.
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch(f"Paired samples differ in length: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise LengthMismatch(f"Paired t-test needs at least 3 pairs, got {len(x)}")
    differences = x - y
    if np.all(differences == differences[0]):
        raise ZeroVariance("Paired differences have zero variance")
    result = stats.ttest_rel(x, y)
    return StatResult(float(result.statistic), float(result.pvalue))


def ks_test(a: Sequence[float], b: Sequence[float]) -> StatResult:
    """
    Two-sample Kolmogorov-Smirnov test.

    ``D`` is the largest distance between the empirical CDFs. The p-value
    comes from the limiting Kolmogorov distribution evaluated at
    ``sqrt(n_a * n_b / (n_a + n_b)) * D``.

    Raises
    ------
    EmptySample
        If either sample is empty.
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if not len(x) or not len(y):
        raise EmptySample("K-S test needs two non-empty samples")
    d = float(stats.ks_2samp(x, y, method="asymp").statistic)
    effective_n = len(x) * len(y) / (len(x) + len(y))
    return StatResult(d, float(stats.kstwobign.sf(np.sqrt(effective_n) * d)))
