"""
Similar-reports component (Susp^R).

A query bug is linked to previously resolved issues, either through textual
similarity of summary and description or through an explicit trace link,
and each linked issue passes its evidence on to the files its fix changed::

    Susp^R(s, b*) = sum over artifacts a with s in fix(a) of sim(a, b*)^2 / |fix(a)|
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Optional, Set

from bug_localizer.artifacts import TRACE, ScoreTable
from bug_localizer.corpus import (
    SECONDS_PER_DAY,
    CommitLog,
    FileSnapshot,
    IssueCorpus,
    IssueKind,
    IssueReport,
    TraceIndex,
    TruthPolicy,
    ground_truth,
)
from bug_localizer.errors import InvalidQuery, NoLinkedCommits
from bug_localizer.textprep import VectorSpace, cosine, preprocess


class CutoffMode(str, Enum):
    """
    Which previously reported issues may contribute evidence.

    RELAXED keeps issues resolved within the year before the query was filed,
    including ones resolved after it. STRICT additionally requires resolution
    before the query was filed.
    """

    RELAXED = "relaxed"
    STRICT = "strict"


@dataclass(frozen=True)
class TraceScoreConfig:
    window_days: int = 365
    max_bug_files: int = 10
    max_feature_files: int = 20


@dataclass
class TraceGraph:
    """
    Query bug, weighted edges to prior artifacts, and the files each fixed.

    Attributes
    ----------
    root : str
        Id of the query bug.
    artifact_edges : dict
        Artifact id to edge weight in [0, 1]; exactly 1.0 for explicit links.
    fix_sets : dict
        Artifact id to the non-empty set of files its fix changed that still
        exist when the query was filed.
    """

    root: str
    artifact_edges: Dict[str, float] = field(default_factory=dict)
    fix_sets: Dict[str, frozenset] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.artifact_edges)


def fix_files(artifact: IssueReport, index: TraceIndex, log: CommitLog) -> Set[str]:
    """Source files changed by an artifact's linked commits (empty when unlinked)."""
    try:
        return ground_truth(artifact, index, log, TruthPolicy.ALL_CHANGED)
    except NoLinkedCommits:
        return set()


def is_explicitly_linked(query: IssueReport, artifact: IssueReport) -> bool:
    return artifact.id in query.linked_issue_ids or query.id in artifact.linked_issue_ids


def select_artifacts(
    query: IssueReport,
    corpus: IssueCorpus,
    index: TraceIndex,
    log: CommitLog,
    mode: CutoffMode = CutoffMode.RELAXED,
    config: Optional[TraceScoreConfig] = None,
) -> Set[str]:
    """
    Pick the prior issues a query bug may draw evidence from.

    An artifact is kept when it was resolved within ``window_days`` before
    the query was filed (under STRICT, strictly before it was filed), its
    fix changed at most ``max_bug_files`` source files (``max_feature_files``
    for feature requests) and it has linked commits.

    Raises
    ------
    InvalidQuery
        If the query is not a bug report.
    """
    config = config or TraceScoreConfig()
    if not query.is_bug:
        raise InvalidQuery(f"{query.id} is a {query.kind.value}, not a bug report")

    horizon = query.created_date - config.window_days * SECONDS_PER_DAY
    selected = set()
    for artifact in corpus:
        if artifact.id == query.id or artifact.resolved_date is None:
            continue
        if artifact.resolved_date <= horizon:
            continue
        if mode is CutoffMode.STRICT and artifact.resolved_date >= query.created_date:
            continue
        limit = (
            config.max_bug_files
            if artifact.kind is IssueKind.BUG
            else config.max_feature_files
        )
        files = fix_files(artifact, index, log)
        if files and len(files) <= limit:
            selected.add(artifact.id)
    return selected


def bug_artifacts(artifact_ids: Iterable[str], corpus: IssueCorpus) -> Set[str]:
    """
    Keep the bug reports among selected artifacts.

    Scoring only these gives the similar-bug-reports baseline, which ignores
    the feature requests trace evidence also draws on.
    """
    return {a for a in artifact_ids if corpus[a].kind is IssueKind.BUG}


def _doc_vector(space: VectorSpace, issue: IssueReport):
    if issue.id in space:
        return space.vector(issue.id)
    return space.transform(preprocess(issue.text))


def build_trace_graph(
    query: IssueReport,
    artifacts: Iterable[str],
    space: VectorSpace,
    index: TraceIndex,
    snapshot: FileSnapshot,
    corpus: IssueCorpus,
    log: CommitLog,
) -> TraceGraph:
    """
    Connect the query to its artifacts and their fixed files.

    Edge weights are the cosine similarity of the issue texts, set to 1.0 for
    explicitly linked issues. Fixed files are restricted to those existing
    just before the query was filed; artifacts left with no file are dropped.
    """
    graph = TraceGraph(root=query.id)
    query_vector = _doc_vector(space, query)
    for artifact_id in sorted(artifacts):
        artifact = corpus[artifact_id]
        files = fix_files(artifact, index, log) & snapshot.files
        if not files:
            continue
        if is_explicitly_linked(query, artifact):
            weight = 1.0
        else:
            weight = cosine(query_vector, _doc_vector(space, artifact))
        graph.artifact_edges[artifact_id] = weight
        graph.fix_sets[artifact_id] = frozenset(files)
    return graph


def trace_score(graph: TraceGraph, component: str = TRACE) -> ScoreTable:
    """Evaluate Susp^R for every file reachable from the query."""
    table = ScoreTable(bug_id=graph.root, component=component)
    for artifact_id in sorted(graph.artifact_edges):
        files = graph.fix_sets[artifact_id]
        contribution = graph.artifact_edges[artifact_id] ** 2 / len(files)
        for path in files:
            table.scores[path] = table.scores.get(path, 0.0) + contribution
    return table
