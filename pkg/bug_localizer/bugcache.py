"""
Version-history component (Susp^H).

Files touched by bug-fixing commits in the ``k`` days before the cut-off
receive a logistic time-decayed score::

    Susp^H(f, b*) = sum over fix commits c touching f of
                    1 / (1 + exp(12 * (1 - (k - t_c) / k)))

where ``t_c`` is the real-valued age of ``c`` in days at the cut-off.
The cut-off is the query's creation date. The resolution date reproduces a
known leaky setup and is only accepted with ``allow_leakage``.
"""

import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, List

from scipy.special import expit

from bug_localizer.artifacts import HISTORY, ScoreTable
from bug_localizer.corpus import (
    SECONDS_PER_DAY,
    CommitLog,
    CommitRecord,
    FileSnapshot,
    IssueCorpus,
    IssueReport,
)
from bug_localizer.errors import ConfigError, LeakageError, LeakageGuardError

DEFAULT_FIX_REGEX = "(.*fix.*)|(.*bug.*)"

LEADING_ISSUE_PATTERN = re.compile(r"^\W*([A-Za-z][A-Za-z0-9_]*-\d+)(?!\w)")


class HistoryCutoff(str, Enum):
    CREATED = "created"
    RESOLVED = "resolved"


@dataclass(frozen=True)
class BugCacheConfig:
    """
    Attributes
    ----------
    k : float
        Window length in days.
    cutoff : HistoryCutoff
        Query date the window ends at.
    fix_regex : str
        Pattern matched against the lowercased commit message.
    allow_leakage : bool
        Must be set to use the resolved-date cut-off.
    """

    k: float = 15
    cutoff: HistoryCutoff = HistoryCutoff.CREATED
    fix_regex: str = DEFAULT_FIX_REGEX
    allow_leakage: bool = False

    def __post_init__(self) -> None:
        if not self.k > 0:
            raise ConfigError(f"BugCache window k must be positive, got {self.k}")
        if self.cutoff is HistoryCutoff.RESOLVED and not self.allow_leakage:
            raise LeakageGuardError(
                "BugCache cut-off 'resolved' reads commits made after the bug was "
                "filed; pass --allow-leakage to use it anyway"
            )
        try:
            re.compile(self.fix_regex)
        except re.error as e:
            raise ConfigError(f"Invalid fix_regex {self.fix_regex!r}: {e}") from None

    @cached_property
    def pattern(self) -> "re.Pattern[str]":
        return re.compile(self.fix_regex, re.DOTALL)


def cutoff_time(query: IssueReport, config: BugCacheConfig) -> int:
    if config.cutoff is HistoryCutoff.RESOLVED and query.resolved_date is not None:
        return query.resolved_date
    return query.created_date


def is_fix_commit(commit: CommitRecord, bug_ids: frozenset, config: BugCacheConfig) -> bool:
    """Message matches the fix pattern once lowercased, or starts with a bug id."""
    if config.pattern.match(commit.message.lower()):
        return True
    leading = LEADING_ISSUE_PATTERN.match(commit.message)
    return leading is not None and leading.group(1) in bug_ids


def find_fix_commits(
    log: CommitLog,
    corpus: IssueCorpus,
    query: IssueReport,
    config: BugCacheConfig,
) -> List[CommitRecord]:
    """Bug-fixing commits in the half-open window ``[cutoff - k days, cutoff)``."""
    end = cutoff_time(query, config)
    start = end - config.k * SECONDS_PER_DAY
    bug_ids = corpus.bug_ids
    return [c for c in log.window(start, end) if is_fix_commit(c, bug_ids, config)]


def decay(age_days: float, k: float) -> float:
    """One commit's contribution; 0.5 at age 0 and strictly decreasing with age."""
    return float(expit(-12.0 * (1.0 - (k - age_days) / k)))


def audit_leakage(
    commits: Iterable[CommitRecord], query: IssueReport, config: BugCacheConfig
) -> None:
    """
    Raise if a commit made at or after the query's creation would be scored.

    Only the explicit leakage setting lifts the check.
    """
    if config.allow_leakage and config.cutoff is HistoryCutoff.RESOLVED:
        return
    for commit in commits:
        if commit.timestamp >= query.created_date:
            raise LeakageError(
                f"Commit {commit.hash} ({commit.timestamp}) is not older than "
                f"{query.id} ({query.created_date})"
            )


def bugcache_score(
    commits: Iterable[CommitRecord],
    query: IssueReport,
    config: BugCacheConfig,
    snapshot: FileSnapshot,
) -> ScoreTable:
    """
    Sum the decayed contributions of fix commits per existing source file.

    Files not in ``snapshot`` (deleted before the query was filed) are never
    scored.
    """
    commits = list(commits)
    audit_leakage(commits, query, config)
    end = cutoff_time(query, config)
    table = ScoreTable(bug_id=query.id, component=HISTORY)
    for commit in commits:
        contribution = decay((end - commit.timestamp) / SECONDS_PER_DAY, config.k)
        for path in sorted(commit.source_paths):
            if path in snapshot:
                table.scores[path] = table.scores.get(path, 0.0) + contribution
    return table
