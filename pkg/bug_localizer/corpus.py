"""
Ingestion of issues, commits and trace links.

Holds the immutable views every scoring component reads from: the issue
corpus, the chronologically sorted commit log, the issue/commit trace index
and the file-existence snapshot obtained by replaying the history.
"""

import csv
import json
import re
from bisect import bisect_left
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Set, Tuple

from identify import identify

from bug_localizer.errors import (
    DuplicateId,
    EmptyHistory,
    InvalidRecord,
    MalformedTimestamp,
    MissingField,
    NoLinkedCommits,
    UnreadableSource,
)

SECONDS_PER_DAY = 86400

# Mirrors both evaluation datasets (Java and Python projects)
DEFAULT_EXTENSIONS = (".java", ".py")

# Whole-token issue keys such as HBASE-123; "HBASE-1234" never yields HBASE-123
ISSUE_TOKEN_PATTERN = re.compile(r"(?<![\w-])([A-Za-z][A-Za-z0-9_]*-\d+)(?!\w)")

FEATURE_KIND_ALIASES = {"feature", "new feature", "improvement", "enhancement"}


class IssueKind(str, Enum):
    BUG = "bug"
    FEATURE = "feature"


class ChangeKind(str, Enum):
    ADDED = "added"
    MODIFIED = "modified"
    DELETED = "deleted"
    RENAMED = "renamed"


class TruthPolicy(str, Enum):
    """Which changes of the fixing commits count as ground truth."""

    ALL_CHANGED = "all"
    EXCLUDE_ADDED = "exclude-added"


@dataclass(frozen=True)
class SourceFilter:
    """
    Decide which paths are source files.

    Attributes
    ----------
    extensions : tuple of str
        Lowercase file extensions including the leading dot.
    """

    extensions: Tuple[str, ...] = DEFAULT_EXTENSIONS

    def __post_init__(self) -> None:
        normalized = tuple(
            ext.lower() if ext.startswith(".") else f".{ext.lower()}"
            for ext in self.extensions
        )
        object.__setattr__(self, "extensions", normalized)

    def is_source(self, path: Optional[str]) -> bool:
        if not path:
            return False
        return path.lower().endswith(self.extensions)


def source_language(path: str) -> Optional[str]:
    """
    Identify the programming language of a source path.

    Parameters
    ----------
    path : str
        File path; only the file name is inspected.

    Returns
    -------
    str or None
        "java" or "python", or None for any other file type.
    """
    tags = identify.tags_from_filename(path)
    for language in ("java", "python"):
        if language in tags:
            return language
    return None


@dataclass(frozen=True)
class IssueReport:
    id: str
    kind: IssueKind
    summary: str
    description: str
    created_date: int
    resolved_date: Optional[int] = None
    linked_issue_ids: frozenset = frozenset()

    @property
    def text(self) -> str:
        """Document text used for similarity: summary followed by description."""
        return f"{self.summary} {self.description}"

    @property
    def is_bug(self) -> bool:
        return self.kind is IssueKind.BUG


@dataclass(frozen=True)
class FileChange:
    old_path: Optional[str]
    new_path: Optional[str]
    kind: ChangeKind
    is_source: bool = True

    def __post_init__(self) -> None:
        valid = {
            ChangeKind.ADDED: self.old_path is None and self.new_path is not None,
            ChangeKind.DELETED: self.old_path is not None and self.new_path is None,
            ChangeKind.RENAMED: (
                self.old_path is not None
                and self.new_path is not None
                and self.old_path != self.new_path
            ),
            ChangeKind.MODIFIED: (
                self.old_path is not None and self.old_path == self.new_path
            ),
        }[self.kind]
        if not valid:
            raise InvalidRecord(
                f"Inconsistent {self.kind.value} change: "
                f"old={self.old_path!r} new={self.new_path!r}"
            )

    @property
    def path(self) -> str:
        """The path a change is attributed to: the new name, or the old one for deletions."""
        return self.new_path if self.new_path is not None else self.old_path  # type: ignore[return-value]


@dataclass(frozen=True)
class CommitRecord:
    hash: str
    timestamp: int
    message: str
    changes: Tuple[FileChange, ...] = ()

    @property
    def source_changes(self) -> Tuple[FileChange, ...]:
        return tuple(change for change in self.changes if change.is_source)

    @property
    def source_paths(self) -> Set[str]:
        return {change.path for change in self.source_changes}


@dataclass
class IssueCorpus:
    """
    Validated issue reports of one project.

    Attributes
    ----------
    issues : dict
        Issue id to IssueReport. Read-only once loading is finished.
    rejected_ids : tuple of str
        Ids of records dropped because resolved_date < created_date.
    """

    issues: Dict[str, IssueReport]
    rejected_ids: Tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.issues)

    def __contains__(self, issue_id: object) -> bool:
        return issue_id in self.issues

    def __getitem__(self, issue_id: str) -> IssueReport:
        return self.issues[issue_id]

    def __iter__(self) -> Iterator[IssueReport]:
        return iter(sorted(self.issues.values(), key=lambda i: (i.created_date, i.id)))

    def get(self, issue_id: str) -> Optional[IssueReport]:
        return self.issues.get(issue_id)

    def bugs(self) -> List[IssueReport]:
        return [issue for issue in self if issue.is_bug]

    @property
    def bug_ids(self) -> frozenset:
        return frozenset(issue.id for issue in self.issues.values() if issue.is_bug)

    def rejection_message(self) -> Optional[str]:
        if not self.rejected_ids:
            return None
        return (
            f"Rejected {len(self.rejected_ids)} issue record(s) with resolved_date "
            f"before created_date: {', '.join(self.rejected_ids)}"
        )


class CommitLog:
    """
    Commits sorted by (timestamp, hash) with time-range lookups.

    Parameters
    ----------
    commits : iterable of CommitRecord
        Commits in any order.
    source_filter : SourceFilter, optional
        Filter the changes were flagged with. Default keeps .java and .py.
    """

    def __init__(
        self,
        commits: Iterable[CommitRecord],
        source_filter: Optional[SourceFilter] = None,
    ):
        ordered = sorted(commits, key=lambda c: (c.timestamp, c.hash))
        self.source_filter = source_filter or SourceFilter()
        self._by_hash: Dict[str, CommitRecord] = {}
        for commit in ordered:
            if commit.hash in self._by_hash:
                raise DuplicateId(f"Duplicate commit hash: {commit.hash}")
            self._by_hash[commit.hash] = commit
        self.commits: Tuple[CommitRecord, ...] = tuple(ordered)
        self._timestamps = [c.timestamp for c in ordered]

    def __len__(self) -> int:
        return len(self.commits)

    def __iter__(self) -> Iterator[CommitRecord]:
        return iter(self.commits)

    def __contains__(self, commit_hash: object) -> bool:
        return commit_hash in self._by_hash

    def get(self, commit_hash: str) -> Optional[CommitRecord]:
        return self._by_hash.get(commit_hash)

    def before(self, as_of: int) -> Tuple[CommitRecord, ...]:
        """Commits with timestamp strictly before ``as_of``."""
        return self.commits[: bisect_left(self._timestamps, as_of)]

    def window(self, start: float, end: float) -> Tuple[CommitRecord, ...]:
        """Commits with ``start <= timestamp < end``."""
        lo = bisect_left(self._timestamps, start)
        hi = bisect_left(self._timestamps, end)
        return self.commits[lo:hi]

    def last_before(self, as_of: int) -> Optional[CommitRecord]:
        index = bisect_left(self._timestamps, as_of)
        return self.commits[index - 1] if index else None


@dataclass(frozen=True)
class TraceIndex:
    """Issue to commit links and their inverse."""

    issue_to_commits: Mapping[str, frozenset] = field(default_factory=dict)
    commit_to_issues: Mapping[str, frozenset] = field(default_factory=dict)
    dangling_links: Tuple[Tuple[str, str], ...] = ()

    @classmethod
    def from_pairs(
        cls,
        pairs: Iterable[Tuple[str, str]],
        dangling_links: Iterable[Tuple[str, str]] = (),
    ) -> "TraceIndex":
        forward: Dict[str, Set[str]] = {}
        backward: Dict[str, Set[str]] = {}
        for issue_id, commit_hash in pairs:
            forward.setdefault(issue_id, set()).add(commit_hash)
            backward.setdefault(commit_hash, set()).add(issue_id)
        return cls(
            issue_to_commits={k: frozenset(v) for k, v in forward.items()},
            commit_to_issues={k: frozenset(v) for k, v in backward.items()},
            dangling_links=tuple(sorted(dangling_links)),
        )

    def commits_for(self, issue_id: str) -> frozenset:
        return self.issue_to_commits.get(issue_id, frozenset())

    def issues_for(self, commit_hash: str) -> frozenset:
        return self.commit_to_issues.get(commit_hash, frozenset())


@dataclass(frozen=True)
class FileSnapshot:
    as_of: int
    files: frozenset

    def __len__(self) -> int:
        return len(self.files)

    def __contains__(self, path: object) -> bool:
        return path in self.files


def parse_timestamp(value: Any, field_name: str = "timestamp", record_id: str = "?") -> int:
    """
    Normalize an ISO-8601 string or epoch number to UTC seconds.

    Naive timestamps are taken as UTC; a trailing ``Z`` is accepted.

    Raises
    ------
    MalformedTimestamp
        If the value cannot be interpreted as a point in time.
    """
    if isinstance(value, bool):
        raise MalformedTimestamp(f"{record_id}: {field_name} is not a timestamp: {value!r}")
    if isinstance(value, (int, float)):
        return int(value)
    if isinstance(value, str):
        text = value.strip()
        if re.fullmatch(r"-?\d+(\.\d+)?", text):
            return int(float(text))
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        try:
            parsed = datetime.fromisoformat(text)
        except ValueError:
            raise MalformedTimestamp(
                f"{record_id}: {field_name} is not ISO-8601: {value!r}"
            ) from None
        if parsed.tzinfo is None:
            parsed = parsed.replace(tzinfo=timezone.utc)
        return int(parsed.timestamp())
    raise MalformedTimestamp(f"{record_id}: {field_name} is not a timestamp: {value!r}")


def _is_blank(value: Any) -> bool:
    return value is None or (isinstance(value, str) and not value.strip())


def _parse_kind(value: str, record_id: str) -> IssueKind:
    kind = str(value).strip().lower()
    if kind == "bug":
        return IssueKind.BUG
    if kind in FEATURE_KIND_ALIASES:
        return IssueKind.FEATURE
    raise InvalidRecord(f"{record_id}: unknown issue kind {value!r}")


def _parse_links(value: Any) -> frozenset:
    if _is_blank(value):
        return frozenset()
    if isinstance(value, str):
        return frozenset(part for part in re.split(r"[;,\s]+", value) if part)
    return frozenset(str(item) for item in value)


def _issue_from_record(record: Mapping[str, Any], location: str) -> IssueReport:
    for name in ("id", "kind", "summary", "created_date"):
        if name not in record or _is_blank(record[name]):
            raise MissingField(f"{location}: missing required field '{name}'")
    issue_id = str(record["id"]).strip()
    created = parse_timestamp(record["created_date"], "created_date", issue_id)
    resolved_raw = record.get("resolved_date")
    resolved = (
        None
        if _is_blank(resolved_raw)
        else parse_timestamp(resolved_raw, "resolved_date", issue_id)
    )
    return IssueReport(
        id=issue_id,
        kind=_parse_kind(record["kind"], issue_id),
        summary=str(record["summary"]),
        description="" if _is_blank(record.get("description")) else str(record["description"]),
        created_date=created,
        resolved_date=resolved,
        linked_issue_ids=_parse_links(record.get("links", record.get("linked_issue_ids"))),
    )


def _read_records(path: Path, fmt: str) -> Iterator[Tuple[str, Mapping[str, Any]]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            if fmt == "csv":
                for line_num, row in enumerate(csv.DictReader(f), 2):
                    yield f"{path.name}:{line_num}", row
            else:
                for line_num, line in enumerate(f, 1):
                    if not line.strip():
                        continue
                    try:
                        yield f"{path.name}:{line_num}", json.loads(line)
                    except json.JSONDecodeError as e:
                        raise InvalidRecord(f"{path.name}:{line_num}: invalid JSON: {e}") from None
    except OSError as e:
        raise UnreadableSource(f"Cannot read {path}: {e}") from None


def load_issues(path: "str | Path", format: Optional[str] = None) -> IssueCorpus:
    """
    Load and validate issue reports.

    Parameters
    ----------
    path : str or Path
        JSON-lines or CSV export with columns id, kind, summary, description,
        created_date, resolved_date and links.
    format : {"jsonl", "csv"}, optional
        Input format. Inferred from the file suffix when omitted.

    Returns
    -------
    IssueCorpus
        Accepted issues. Records whose resolved_date precedes their
        created_date are dropped and listed in ``rejected_ids``.

    Raises
    ------
    MissingField, MalformedTimestamp, DuplicateId
        On the first offending record.
    """
    path = Path(path)
    fmt = (format or ("csv" if path.suffix.lower() == ".csv" else "jsonl")).lower()
    if fmt not in ("jsonl", "csv"):
        raise InvalidRecord(f"Unsupported issue format: {format}")

    issues: Dict[str, IssueReport] = {}
    rejected: List[str] = []
    seen: Set[str] = set()
    for location, record in _read_records(path, fmt):
        issue = _issue_from_record(record, location)
        if issue.id in seen:
            raise DuplicateId(f"{location}: duplicate issue id {issue.id}")
        seen.add(issue.id)
        if issue.resolved_date is not None and issue.resolved_date < issue.created_date:
            rejected.append(issue.id)
            continue
        issues[issue.id] = issue
    return IssueCorpus(issues=issues, rejected_ids=tuple(rejected))


def _change_from_record(
    record: Mapping[str, Any], source_filter: SourceFilter, location: str
) -> FileChange:
    old = None if _is_blank(record.get("old")) else str(record["old"])
    new = None if _is_blank(record.get("new")) else str(record["new"])
    raw_kind = str(record.get("kind", "")).strip().lower()
    short = {"a": "added", "m": "modified", "d": "deleted", "r": "renamed"}
    try:
        kind = ChangeKind(short.get(raw_kind, raw_kind))
    except ValueError:
        raise InvalidRecord(f"{location}: unknown change kind {record.get('kind')!r}") from None
    if kind is ChangeKind.MODIFIED:
        old = old or new
        new = new or old
    try:
        return FileChange(
            old_path=old,
            new_path=new,
            kind=kind,
            is_source=source_filter.is_source(new) or source_filter.is_source(old),
        )
    except InvalidRecord as e:
        raise InvalidRecord(f"{location}: {e}") from None


def _commits_from_jsonl(path: Path, source_filter: SourceFilter) -> List[CommitRecord]:
    commits = []
    for location, record in _read_records(path, "jsonl"):
        for name in ("hash", "timestamp"):
            if name not in record or _is_blank(record[name]):
                raise MissingField(f"{location}: missing required field '{name}'")
        commit_hash = str(record["hash"])
        commits.append(
            CommitRecord(
                hash=commit_hash,
                timestamp=parse_timestamp(record["timestamp"], "timestamp", commit_hash),
                message=str(record.get("message") or ""),
                changes=tuple(
                    _change_from_record(change, source_filter, location)
                    for change in record.get("changes") or []
                ),
            )
        )
    return commits


def _commits_from_repository(path: Path, source_filter: SourceFilter) -> List[CommitRecord]:
    from git.exc import GitError
    from pydriller import Repository
    from pydriller.domain.commit import ModificationType

    commits = []
    try:
        for commit in Repository(str(path)).traverse_commits():
            changes = []
            for modified in commit.modified_files:
                old, new = modified.old_path, modified.new_path
                if modified.change_type in (ModificationType.ADD, ModificationType.COPY):
                    old, kind = None, ChangeKind.ADDED
                elif modified.change_type == ModificationType.DELETE:
                    new, kind = None, ChangeKind.DELETED
                elif modified.change_type == ModificationType.RENAME and old != new:
                    kind = ChangeKind.RENAMED
                elif modified.change_type in (ModificationType.MODIFY, ModificationType.RENAME):
                    old, kind = new, ChangeKind.MODIFIED
                else:
                    continue
                changes.append(
                    FileChange(
                        old_path=old,
                        new_path=new,
                        kind=kind,
                        is_source=source_filter.is_source(new) or source_filter.is_source(old),
                    )
                )
            commits.append(
                CommitRecord(
                    hash=commit.hash,
                    timestamp=int(commit.committer_date.timestamp()),
                    message=commit.msg,
                    changes=tuple(changes),
                )
            )
    except (GitError, OSError, ValueError) as e:
        raise UnreadableSource(f"Cannot read repository {path}: {e}") from None
    return commits


def load_commits(
    source: "str | Path", source_filter: Optional[SourceFilter] = None
) -> CommitLog:
    """
    Load the version history from a commit-log export or a local clone.

    Parameters
    ----------
    source : str or Path
        A commits.jsonl file or the root of a git repository.
    source_filter : SourceFilter, optional
        Extension filter used to flag source changes.

    Returns
    -------
    CommitLog

    Raises
    ------
    UnreadableSource
        If the path does not exist or cannot be parsed.
    EmptyHistory
        If no commit was found.
    """
    path = Path(source)
    source_filter = source_filter or SourceFilter()
    if path.is_dir():
        commits = _commits_from_repository(path, source_filter)
    elif path.is_file():
        commits = _commits_from_jsonl(path, source_filter)
    else:
        raise UnreadableSource(f"Commit source does not exist: {path}")
    if not commits:
        raise EmptyHistory(f"No commits found in {path}")
    return CommitLog(commits, source_filter)


def load_links(path: "str | Path") -> List[Tuple[str, str]]:
    """Read an explicit ``issue_id,commit_hash`` side file."""
    path = Path(path)
    links = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            for row in csv.DictReader(f):
                issue_id = (row.get("issue_id") or "").strip()
                commit_hash = (row.get("commit_hash") or "").strip()
                if issue_id and commit_hash:
                    links.append((issue_id, commit_hash))
    except OSError as e:
        raise UnreadableSource(f"Cannot read links file {path}: {e}") from None
    return links


def issue_tokens(message: str) -> List[str]:
    """Issue keys appearing as whole tokens in a commit message, in order."""
    return ISSUE_TOKEN_PATTERN.findall(message)


def link_issues_commits(
    corpus: IssueCorpus,
    log: CommitLog,
    explicit_links: Iterable[Tuple[str, str]] = (),
) -> TraceIndex:
    """
    Link commits to issues.

    A commit links to an issue when an explicit link record names the pair,
    or when the commit message contains the issue id as a whole token.
    Explicit links naming an unknown issue or commit are kept aside in
    ``TraceIndex.dangling_links``.
    """
    pairs: Set[Tuple[str, str]] = set()
    dangling = []
    for issue_id, commit_hash in explicit_links:
        if issue_id in corpus and commit_hash in log:
            pairs.add((issue_id, commit_hash))
        else:
            dangling.append((issue_id, commit_hash))

    for commit in log:
        for token in issue_tokens(commit.message):
            if token in corpus:
                pairs.add((token, commit.hash))
    return TraceIndex.from_pairs(sorted(pairs), dangling)


def apply_changes(files: Set[str], commit: CommitRecord, source_filter: SourceFilter) -> None:
    """Replay one commit's changes onto a mutable set of existing source files."""
    for change in commit.changes:
        if change.kind is ChangeKind.DELETED:
            files.discard(change.old_path)  # type: ignore[arg-type]
            continue
        if change.kind is ChangeKind.RENAMED:
            files.discard(change.old_path)  # type: ignore[arg-type]
        if source_filter.is_source(change.new_path):
            files.add(change.new_path)  # type: ignore[arg-type]


def snapshot_files(log: CommitLog, as_of: int) -> FileSnapshot:
    """
    Source files existing just before ``as_of``.

    Replays every change with timestamp < as_of: additions and modifications
    make a file exist, deletions remove it, renames move it to the new path.
    """
    files: Set[str] = set()
    for commit in log.before(as_of):
        apply_changes(files, commit, log.source_filter)
    return FileSnapshot(as_of=as_of, files=frozenset(files))


def _linked_commits(issue: IssueReport, index: TraceIndex, log: CommitLog) -> List[CommitRecord]:
    commits = [log.get(h) for h in index.commits_for(issue.id)]
    linked = sorted((c for c in commits if c is not None), key=lambda c: (c.timestamp, c.hash))
    if not linked:
        raise NoLinkedCommits(f"Issue {issue.id} has no linked commits")
    return linked


def newly_added_files(issue: IssueReport, index: TraceIndex, log: CommitLog) -> Set[str]:
    """Source files created by the issue's fixing commits."""
    return {
        change.new_path  # type: ignore[misc]
        for commit in _linked_commits(issue, index, log)
        for change in commit.source_changes
        if change.kind is ChangeKind.ADDED
    }


def ground_truth(
    issue: IssueReport,
    index: TraceIndex,
    log: CommitLog,
    policy: TruthPolicy = TruthPolicy.ALL_CHANGED,
) -> Set[str]:
    """
    Files changed by an issue's fixing commits.

    Renamed files are reported under their new name and deleted files under
    their old name. Under ``EXCLUDE_ADDED`` every file created by one of the
    fixing commits is left out, since no pre-fix ranking can contain it.

    Raises
    ------
    NoLinkedCommits
        If no linked commit is present in the log.
    """
    truth: Set[str] = set()
    added: Set[str] = set()
    for commit in _linked_commits(issue, index, log):
        for change in commit.source_changes:
            if change.kind is ChangeKind.ADDED:
                added.add(change.new_path)  # type: ignore[arg-type]
            if log.source_filter.is_source(change.path):
                truth.add(change.path)
    if policy is TruthPolicy.EXCLUDE_ADDED:
        truth -= added
    return truth
