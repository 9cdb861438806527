"""
Run orchestration: ingest, score, fuse, evaluate, report.

Every stage persists its output under the run's working directory so later
stages (and third-party composers) can start from the artifacts instead of
re-scoring.
"""

import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple, TypeVar

from bug_localizer import __version__
from bug_localizer.artifacts import (
    COMPONENT_NAMES,
    COMPONENTS,
    HISTORY,
    SIMI,
    STRUCTURE,
    TRACE,
    ScoreTable,
    input_hash,
    read_csv,
    read_json,
    read_score_tables,
    write_csv,
    write_json,
    write_score_tables,
)
from bug_localizer.bugcache import bugcache_score, find_fix_commits
from bug_localizer.codestruct import (
    DirectorySource,
    GitSource,
    StructuredIndex,
    index_snapshot,
    structure_score,
)
from bug_localizer.composer import (
    FeatureRow,
    FusionSpec,
    Model,
    RankedList,
    assemble_features,
    compose,
    prepare_training_rows,
    split_train_test,
    train_model,
)
from bug_localizer.config import RunConfig
from bug_localizer.corpus import (
    CommitLog,
    FileSnapshot,
    IssueCorpus,
    IssueReport,
    TraceIndex,
    TruthPolicy,
    apply_changes,
    ground_truth,
    link_issues_commits,
    load_commits,
    load_issues,
    load_links,
    newly_added_files,
)
from bug_localizer.errors import (
    ConfigError,
    EmptySample,
    InsufficientOverlap,
    NoLinkedCommits,
    UnreadableSource,
    ZeroVariance,
)
from bug_localizer.evaluation import METRICS, MetricsReport, evaluate_rankings, ks_test, paired_ttest
from bug_localizer.textprep import TokenList, VectorSpace, build_tfidf, export_vocabulary, preprocess
from bug_localizer.tracescore import (
    CutoffMode,
    bug_artifacts,
    build_trace_graph,
    select_artifacts,
    trace_score,
)

REPORT_COLUMNS = ["PROJECT", "COMPOSER"] + list(METRICS)
COMPARE_COLUMNS = ["composer", "metric", "test", "projects", "statistic", "pvalue", "status"]
COMPARE_TESTS = ("ttest", "ks")

SCORE_FILES = {
    TRACE: "scores_trace.csv",
    HISTORY: "scores_history.csv",
    STRUCTURE: "scores_structure.csv",
}
SIMI_FILE = "scores_simi.csv"

T = TypeVar("T")


@dataclass
class Dataset:
    """
    Ingested project data shared by every stage.

    Attributes
    ----------
    eligible : list of str
        Resolved bugs with linked commits, non-empty ground truth and a
        non-empty snapshot, in id order.
    skipped : dict
        Bug id to the reason it is not eligible.
    snapshots : dict
        Bug id to the source files existing just before it was filed.
    added : dict
        Bug id to the truth files its fix created (counted under every
        truth policy).
    """

    corpus: IssueCorpus
    log: CommitLog
    index: TraceIndex
    eligible: List[str]
    skipped: Dict[str, str]
    train_ids: List[str]
    test_ids: List[str]
    truths: Dict[str, frozenset]
    snapshots: Dict[str, FileSnapshot]
    added: Dict[str, frozenset] = field(default_factory=dict)

    @property
    def window_of(self) -> Dict[str, str]:
        windows = {bug_id: "train" for bug_id in self.train_ids}
        windows.update({bug_id: "test" for bug_id in self.test_ids})
        return windows


def snapshots_for(log: CommitLog, bugs: Iterable[IssueReport]) -> Dict[str, FileSnapshot]:
    """
    Snapshot of every bug, replaying the commit log once.

    Equivalent to calling ``snapshot_files(log, bug.created_date)`` per bug.
    """
    commits = list(log)
    files: Set[str] = set()
    position = 0
    snapshots = {}
    for bug in sorted(bugs, key=lambda b: (b.created_date, b.id)):
        while position < len(commits) and commits[position].timestamp < bug.created_date:
            apply_changes(files, commits[position], log.source_filter)
            position += 1
        snapshots[bug.id] = FileSnapshot(as_of=bug.created_date, files=frozenset(files))
    return snapshots


def _input_fingerprint(path: Optional[str]) -> Optional[str]:
    if not path:
        return None
    location = Path(path)
    if (location / ".git").exists():
        from git import Repo

        return f"git:{Repo(str(location)).head.commit.hexsha}"
    if not location.exists():
        return None
    return f"sha256:{input_hash(location)}"


class Pipeline:
    """
    Stage runner for one project.

    Parameters
    ----------
    config : RunConfig
        Settings of the run.
    quiet : bool, optional
        Suppress all console output (default: False).
    verbose : bool, optional
        Echo the configuration, per-stage progress and written artifacts
        (default: False).
    """

    def __init__(self, config: RunConfig, quiet: bool = False, verbose: bool = False):
        self.config = config
        self.quiet = quiet
        self.verbose = verbose
        self.workdir = Path(config.workdir)
        self._dataset: Optional[Dataset] = None
        self._tokens: Optional[Dict[str, TokenList]] = None

    # Console output

    def _info(self, message: str) -> None:
        if not self.quiet:
            print(message)

    def _detail(self, message: str) -> None:
        if self.verbose and not self.quiet:
            print(message)

    def _warn(self, message: str) -> None:
        if not self.quiet:
            print(f"⚠️  Warning: {message}", file=sys.stderr)

    def _written(self, path: Path) -> Path:
        self._detail(f"   wrote {path}")
        return path

    # Ingestion

    def ingest(self) -> Dataset:
        """
        Load issues, commits and links, then derive truths, snapshots and the split.

        Writes ``split.json``, ``truth.csv`` and ``run_manifest.json``.

        Raises
        ------
        ConfigError
            If the issues or commits input is not configured.
        DataError
            For unreadable or invalid inputs, or too few eligible bugs.
        """
        config = self.config
        if not config.issues or not config.commits:
            raise ConfigError("Both 'issues' and 'commits' inputs must be configured")
        if self.verbose and not self.quiet:
            print("🔧 Configuration:")
            for key, value in sorted(config.to_dict().items()):
                print(f"   {key} = {value}")

        self._info(f"🔍 Ingesting project {config.project}...")
        corpus = load_issues(config.issues, config.issues_format)
        if corpus.rejected_ids:
            self._warn(corpus.rejection_message() or "")
        log = load_commits(config.commits, config.source_filter())
        links = load_links(config.links) if config.links else []
        index = link_issues_commits(corpus, log, links)
        for issue_id, commit_hash in index.dangling_links:
            self._warn(f"Skipping link {issue_id} -> {commit_hash}: unknown issue or commit")
        self._detail(f"   {len(corpus)} issues, {len(log)} commits, {len(index.commit_to_issues)} linked commits")

        policy = TruthPolicy(config.truth_policy)
        bugs = [bug for bug in corpus.bugs() if bug.resolved_date is not None]
        snapshots = snapshots_for(log, bugs)
        truths: Dict[str, frozenset] = {}
        added: Dict[str, frozenset] = {}
        skipped: Dict[str, str] = {}
        for bug in bugs:
            try:
                truth = ground_truth(bug, index, log, policy)
            except NoLinkedCommits:
                skipped[bug.id] = "no linked commits"
                continue
            if not truth:
                skipped[bug.id] = "empty ground truth"
                continue
            if not snapshots[bug.id].files:
                skipped[bug.id] = "empty snapshot"
                continue
            truths[bug.id] = frozenset(truth)
            all_changed = ground_truth(bug, index, log, TruthPolicy.ALL_CHANGED)
            added[bug.id] = frozenset(newly_added_files(bug, index, log) & all_changed)
        for bug in corpus.bugs():
            if bug.resolved_date is None:
                skipped[bug.id] = "unresolved"

        eligible = [bug for bug in bugs if bug.id in truths]
        train_ids, test_ids = split_train_test(eligible, config.split_ratio)
        dataset = Dataset(
            corpus=corpus,
            log=log,
            index=index,
            eligible=sorted(truths),
            skipped=dict(sorted(skipped.items())),
            train_ids=train_ids,
            test_ids=test_ids,
            truths=truths,
            snapshots={bug_id: snapshots[bug_id] for bug_id in sorted(truths)},
            added=added,
        )
        self._write_ingest_artifacts(dataset)
        self._info(
            f"✅ Ingested {len(dataset.eligible)} eligible bugs "
            f"({len(train_ids)} train, {len(test_ids)} test, {len(skipped)} skipped)"
        )
        self._dataset = dataset
        return dataset

    def _write_ingest_artifacts(self, dataset: Dataset) -> None:
        self._written(
            write_json(
                self.workdir / "split.json",
                {
                    "train": dataset.train_ids,
                    "test": dataset.test_ids,
                    "skipped": dataset.skipped,
                },
            )
        )
        self._written(
            write_csv(
                self.workdir / "truth.csv",
                ["bug_id", "file_path", "newly_added"],
                (
                    (bug_id, path, int(path in dataset.added.get(bug_id, ())))
                    for bug_id in dataset.eligible
                    for path in sorted(dataset.truths[bug_id])
                ),
            )
        )
        self._written(write_json(self.workdir / "run_manifest.json", self.manifest()))

    def manifest(self) -> Dict[str, Any]:
        config = self.config
        return {
            "version": __version__,
            "seed": config.seed,
            "config": config.to_dict(),
            "inputs": {
                name: _input_fingerprint(getattr(config, name))
                for name in ("issues", "commits", "links", "sources")
            },
        }

    @property
    def dataset(self) -> Dataset:
        if self._dataset is None:
            self.ingest()
        return self._dataset  # type: ignore[return-value]

    # Scoring

    def _fan_out(self, bug_ids: Sequence[str], score: Callable[[str], T]) -> List[T]:
        """Score bugs on a bounded worker pool; results come back in bug id order."""
        with ThreadPoolExecutor(max_workers=self.config.workers) as executor:
            return list(executor.map(score, sorted(bug_ids)))

    @property
    def issue_tokens(self) -> Dict[str, TokenList]:
        """Preprocessed summary and description of every issue."""
        if self._tokens is None:
            self._tokens = {issue.id: preprocess(issue.text) for issue in self.dataset.corpus}
        return self._tokens

    def space_for(self, query: IssueReport) -> VectorSpace:
        """
        TF-IDF space fitted on the issues filed no later than ``query``.

        Issues filed afterwards are vectorized in this space when they are
        trace artifacts but never contribute terms or document frequencies.
        """
        tokens = self.issue_tokens
        return build_tfidf(
            {
                issue.id: tokens[issue.id]
                for issue in self.dataset.corpus
                if issue.created_date <= query.created_date
            }
        )

    def score_trace(self) -> List[ScoreTable]:
        """
        Trace evidence per eligible bug.

        Also writes the bug-reports-only baseline to ``scores_simi.csv`` and the
        vocabulary seen by the latest eligible bug to ``vocabulary.csv``.
        """
        data = self.dataset
        mode = CutoffMode(self.config.cutoff_mode)
        trace_config = self.config.trace_config()
        self.issue_tokens  # preprocess once, before the workers start

        def score(bug_id: str) -> Tuple[ScoreTable, ScoreTable]:
            query = data.corpus[bug_id]
            snapshot = data.snapshots[bug_id]
            space = self.space_for(query)
            artifacts = select_artifacts(query, data.corpus, data.index, data.log, mode, trace_config)
            graph = build_trace_graph(query, artifacts, space, data.index, snapshot, data.corpus, data.log)
            baseline = build_trace_graph(
                query, bug_artifacts(artifacts, data.corpus), space, data.index, snapshot, data.corpus, data.log
            )
            return trace_score(graph), trace_score(baseline, SIMI)

        self._info(f"🔍 Scoring trace evidence ({mode.value} cut-off)...")
        pairs = self._fan_out(data.eligible, score)
        self._written(write_score_tables(self.workdir / SIMI_FILE, [simi for _, simi in pairs], SIMI))
        latest = max((data.corpus[b] for b in data.eligible), key=lambda bug: (bug.created_date, bug.id))
        self._written(export_vocabulary(self.space_for(latest), self.workdir / "vocabulary.csv"))
        return [trace for trace, _ in pairs]

    def score_history(self) -> List[ScoreTable]:
        data = self.dataset
        cache_config = self.config.bugcache_config()

        def score(bug_id: str) -> ScoreTable:
            query = data.corpus[bug_id]
            commits = find_fix_commits(data.log, data.corpus, query, cache_config)
            return bugcache_score(commits, query, cache_config, data.snapshots[bug_id])

        self._info(
            f"🔍 Scoring change history (k={self.config.bugcache_k:g} days, "
            f"cut-off {self.config.bugcache_cutoff})..."
        )
        if self.config.allow_leakage:
            self._warn("Leakage allowed: history scores may use commits made after a bug was filed")
        return self._fan_out(data.eligible, score)

    def _source_provider(self):
        if self.config.sources:
            path = Path(self.config.sources)
            if (path / ".git").exists():
                return GitSource(path, self.dataset.log)
            if path.is_dir():
                return DirectorySource(path)
            raise UnreadableSource(f"Sources directory does not exist: {path}")
        commits = Path(self.config.commits or "")
        if (commits / ".git").exists():
            return GitSource(commits, self.dataset.log)
        raise ConfigError("Code structure scoring needs 'sources' or a git repository as 'commits'")

    def _window_indexes(self, source) -> Dict[str, StructuredIndex]:
        """One index per split window over every file any of its bugs can see."""
        data = self.dataset
        indexes = {}
        for window, bug_ids in (("train", data.train_ids), ("test", data.test_ids)):
            if not bug_ids:
                continue
            files = frozenset().union(*(data.snapshots[b].files for b in bug_ids))
            as_of = max(data.snapshots[b].as_of for b in bug_ids)
            indexes[window] = index_snapshot(
                FileSnapshot(as_of=as_of, files=files), source, self.config.bm25_k1, self.config.bm25_b
            )
            self._detail(f"   indexed {len(files)} files for the {window} window")
        return indexes

    def score_structure(self) -> List[ScoreTable]:
        data = self.dataset
        config = self.config
        source = self._source_provider()
        self._info(f"🔍 Scoring code structure ({config.snapshot_granularity} index)...")
        window_indexes = self._window_indexes(source) if config.snapshot_granularity == "per_window" else {}
        windows = data.window_of

        def score(bug_id: str) -> ScoreTable:
            snapshot = data.snapshots[bug_id]
            if window_indexes:
                structured = window_indexes[windows[bug_id]]
            else:
                structured = index_snapshot(snapshot, source, config.bm25_k1, config.bm25_b)
            return structure_score(data.corpus[bug_id], structured, candidates=set(snapshot.files))

        return self._fan_out(data.eligible, score)

    def score(self, component: str) -> List[ScoreTable]:
        """
        Score every eligible bug with one component and persist the table.

        Parameters
        ----------
        component : str
            ``trace``, ``history`` or ``structure``.
        """
        scorers = {
            "trace": (TRACE, self.score_trace),
            "history": (HISTORY, self.score_history),
            "structure": (STRUCTURE, self.score_structure),
        }
        if component not in scorers:
            raise ConfigError(f"Unknown component {component!r}; choose from trace, history, structure")
        key, scorer = scorers[component]
        tables = scorer()
        self._written(write_score_tables(self.workdir / SCORE_FILES[key], tables, key))
        self._info(f"✅ Scored {len(tables)} bugs with {component}")
        return tables

    # Fusion

    def _load_tables(self) -> Dict[str, Dict[str, ScoreTable]]:
        tables = {}
        for key, name in SCORE_FILES.items():
            path = self.workdir / name
            if not path.exists():
                raise UnreadableSource(
                    f"Missing {path}; run 'score {COMPONENT_NAMES[key]}' first"
                )
            tables[key] = read_score_tables(path)
        return tables

    def feature_rows(self) -> Dict[str, List[FeatureRow]]:
        """Feature rows per eligible bug from the persisted score tables; writes ``features.csv``."""
        data = self.dataset
        tables = self._load_tables()
        rows = {
            bug_id: assemble_features(
                data.corpus[bug_id],
                {key: tables[key].get(bug_id, ScoreTable(bug_id, key)) for key in COMPONENTS},
                data.snapshots[bug_id],
                data.truths[bug_id],
            )
            for bug_id in data.eligible
        }
        self._written(
            write_csv(
                self.workdir / "features.csv",
                ["bug_id", "file_path", *COMPONENTS, "label"],
                (
                    (row.bug_id, row.file_path, row.susp_r, row.susp_h, row.susp_s, int(row.label))
                    for bug_id in data.eligible
                    for row in rows[bug_id]
                ),
            )
        )
        return rows

    def _train(self, spec: FusionSpec, rows: Dict[str, List[FeatureRow]]) -> Model:
        training = [row for bug_id in self.dataset.train_ids for row in rows[bug_id]]
        seed = int(spec.params["seed"])
        model = train_model(spec.kind, prepare_training_rows(training, spec), spec.params.get("hyper"), seed)
        self._detail(f"   trained {spec.name} on {len(self.dataset.train_ids)} bugs (seed {seed})")
        return model

    def fuse(self) -> Dict[str, Dict[str, RankedList]]:
        """
        Rank the test bugs with every configured composer.

        Supervised composers train on the training window only. Writes
        ``features.csv``, ``rankings_<composer>.csv`` and ``models.json``.
        """
        rows = self.feature_rows()
        test_ids = self.dataset.test_ids
        results: Dict[str, Dict[str, RankedList]] = {}
        diagnostics: Dict[str, Any] = {}
        for spec in self.config.fusion_specs():
            self._info(f"🔍 Fusing with {spec.name}...")
            model = self._train(spec, rows) if spec.kind.supervised else None
            if model is not None:
                diagnostics[spec.name] = {
                    "feature_importances": model.feature_importances,
                    "coefficients": model.coefficients,
                    "seed": model.seed,
                }
            rankings = {bug_id: compose(spec, rows[bug_id], model) for bug_id in test_ids}
            self._written(write_rankings(self.workdir / f"rankings_{spec.name}.csv", rankings))
            results[spec.name] = rankings
        self._written(write_json(self.workdir / "models.json", diagnostics))
        self._info(f"✅ Ranked {len(test_ids)} test bugs with {len(results)} composer(s)")
        return results

    # Evaluation

    def evaluate(self) -> Dict[str, Any]:
        """
        Evaluate persisted rankings and the standalone components on the test bugs.

        Writes ``report.json`` and a single-project ``report.csv``.
        """
        data = self.dataset
        project = self.config.project
        truths = {bug_id: data.truths[bug_id] for bug_id in data.test_ids}

        composers: Dict[str, MetricsReport] = {}
        for spec in self.config.fusion_specs():
            path = self.workdir / f"rankings_{spec.name}.csv"
            if not path.exists():
                raise UnreadableSource(f"Missing {path}; run 'fuse' first")
            composers[spec.name] = evaluate_rankings(read_rankings(path), truths, project)

        tables = self._load_tables()
        standalone = [(COMPONENT_NAMES[key], key, tables[key]) for key in COMPONENTS]
        simi_path = self.workdir / SIMI_FILE
        if simi_path.exists():
            standalone.append(("simi", SIMI, read_score_tables(simi_path)))
        components = {}
        for name, key, by_bug in standalone:
            rankings = {
                bug_id: component_ranking(by_bug.get(bug_id, ScoreTable(bug_id, key)), data.snapshots[bug_id])
                for bug_id in data.test_ids
            }
            components[name] = evaluate_rankings(rankings, truths, project).to_dict()

        models_path = self.workdir / "models.json"
        report = {
            "project": project,
            "composers": {name: r.to_dict() for name, r in composers.items()},
            "components": components,
            "models": read_json(models_path) if models_path.exists() else {},
            "ground_truth": self.truth_statistics(),
            "project_size": self.project_size(),
            "split": {"train": len(data.train_ids), "test": len(data.test_ids)},
        }
        if "simi" in components:
            report["trace_gain_over_simi"] = {
                m: components["trace"]["aggregates"][m] - components["simi"]["aggregates"][m] for m in METRICS
            }
        self._written(write_json(self.workdir / "report.json", report))
        self._written(
            write_csv(
                self.workdir / "report.csv",
                REPORT_COLUMNS,
                report_rows(report),
            )
        )
        for name, metrics in composers.items():
            summary = ", ".join(f"{m} {metrics.aggregates[m]:.3f}" for m in METRICS)
            self._info(f"✅ {project} {name}: {summary}")
            if metrics.mrr_excluded:
                self._warn(f"{metrics.mrr_excluded} bug(s) have no relevant file ranked; left out of MRR")
        return report

    def truth_statistics(self) -> Dict[str, Any]:
        data = self.dataset
        total = sum(len(data.truths[b] | data.added[b]) for b in data.eligible)
        added = sum(len(data.added[b]) for b in data.eligible)
        return {
            "policy": self.config.truth_policy,
            "bugs": len(data.eligible),
            "truth_files": total,
            "newly_added_files": added,
            "newly_added_share": added / total if total else 0.0,
        }

    def project_size(self) -> Dict[str, Any]:
        sizes = {bug_id: len(snapshot) for bug_id, snapshot in self.dataset.snapshots.items()}
        return {
            "mean_snapshot_size": sum(sizes.values()) / len(sizes) if sizes else 0.0,
            "per_bug": sizes,
        }

    def run(self) -> Dict[str, Any]:
        """Every stage in order; returns the report."""
        self.ingest()
        for component in ("trace", "history", "structure"):
            self.score(component)
        self.fuse()
        return self.evaluate()


def component_ranking(table: ScoreTable, snapshot: FileSnapshot) -> RankedList:
    """Rank the whole snapshot by one component's scores (missing files score 0)."""
    return RankedList.from_scores(table.bug_id, {path: table.get(path) for path in snapshot.files})


def write_rankings(path: "str | Path", rankings: Dict[str, RankedList]) -> Path:
    return write_csv(
        path,
        ["bug_id", "rank", "file_path", "score"],
        (
            (bug_id, rank, file_path, score)
            for bug_id in sorted(rankings)
            for rank, (file_path, score) in enumerate(rankings[bug_id].candidates, 1)
        ),
    )


def read_rankings(path: "str | Path") -> Dict[str, RankedList]:
    grouped: Dict[str, List[Tuple[int, str, float]]] = {}
    for row in read_csv(path):
        grouped.setdefault(row["bug_id"], []).append((int(row["rank"]), row["file_path"], float(row["score"])))
    return {
        bug_id: RankedList(bug_id, tuple((p, s) for _, p, s in sorted(entries)))
        for bug_id, entries in grouped.items()
    }


def report_rows(report: Dict[str, Any]) -> List[List[Any]]:
    return [
        [report["project"], name, *(float(metrics["aggregates"][m]) for m in METRICS)]
        for name, metrics in sorted(report["composers"].items())
    ]


def run_pipeline(config: RunConfig, quiet: bool = False, verbose: bool = False) -> Dict[str, Any]:
    """Run every stage for ``config``; artifacts land in ``config.workdir``."""
    return Pipeline(config, quiet=quiet, verbose=verbose).run()


def merge_reports(report_paths: Sequence["str | Path"], output: "str | Path") -> Path:
    """
    Merge per-project ``report.json`` files into one multi-project ``report.csv``.

    Raises
    ------
    EmptySample
        If no report is given.
    """
    if not report_paths:
        raise EmptySample("No report.json given to merge")
    rows: List[List[Any]] = []
    for path in report_paths:
        try:
            rows.extend(report_rows(read_json(path)))
        except (OSError, ValueError, KeyError) as e:
            raise UnreadableSource(f"Cannot read report {path}: {e}") from None
    rows.sort(key=lambda row: (row[0], row[1]))
    return write_csv(output, REPORT_COLUMNS, rows)


def load_report_table(path: "str | Path") -> Dict[Tuple[str, str], Dict[str, float]]:
    """
    ``(project, composer) -> metrics`` from a report.csv or report.json.
    """
    path = Path(path)
    try:
        if path.suffix.lower() == ".json":
            rows = [dict(zip(REPORT_COLUMNS, row)) for row in report_rows(read_json(path))]
        else:
            rows = read_csv(path)
        return {
            (str(row["PROJECT"]), str(row["COMPOSER"])): {m: float(row[m]) for m in METRICS}
            for row in rows
        }
    except (OSError, ValueError, KeyError) as e:
        raise UnreadableSource(f"Cannot read report {path}: {e}") from None


def compare_runs(
    report_a: "str | Path",
    report_b: "str | Path",
    test: str = "ttest",
    composer: Optional[str] = None,
    output: "str | Path | None" = None,
) -> List[Dict[str, Any]]:
    """
    Compare two multi-project reports metric by metric.

    Projects are paired by name. A metric whose paired differences are all
    equal is reported with status ``zero_variance`` and no statistic.

    Parameters
    ----------
    report_a, report_b : str or Path
        ``report.csv`` (or ``report.json``) files.
    test : {"ttest", "ks"}
        Paired t-test or two-sample Kolmogorov-Smirnov test.
    composer : str, optional
        Restrict the comparison to one composer; by default every composer
        present in both reports is compared.
    output : str or Path, optional
        Where to write the comparison CSV.

    Raises
    ------
    InsufficientOverlap
        If a compared composer has fewer than three projects in common.
    """
    if test not in COMPARE_TESTS:
        raise ConfigError(f"Unknown test {test!r}; choose from {', '.join(COMPARE_TESTS)}")
    table_a = load_report_table(report_a)
    table_b = load_report_table(report_b)
    composers_a = {name for _, name in table_a}
    composers_b = {name for _, name in table_b}
    names = sorted(composers_a & composers_b) if composer is None else [composer]
    if not names:
        raise InsufficientOverlap("The reports share no composer")

    results: List[Dict[str, Any]] = []
    for name in names:
        projects = sorted(
            {p for p, c in table_a if c == name} & {p for p, c in table_b if c == name}
        )
        if len(projects) < 3:
            raise InsufficientOverlap(
                f"Composer {name} has {len(projects)} common project(s); at least 3 are needed"
            )
        for metric in METRICS:
            a = [table_a[(p, name)][metric] for p in projects]
            b = [table_b[(p, name)][metric] for p in projects]
            entry: Dict[str, Any] = {
                "composer": name,
                "metric": metric,
                "test": test,
                "projects": len(projects),
                "statistic": None,
                "pvalue": None,
                "status": "ok",
            }
            try:
                result = paired_ttest(a, b) if test == "ttest" else ks_test(a, b)
            except ZeroVariance:
                entry["status"] = "zero_variance"
            else:
                entry["statistic"] = result.statistic
                entry["pvalue"] = result.pvalue
            results.append(entry)

    if output is not None:
        write_csv(
            output,
            COMPARE_COLUMNS,
            (["" if entry[c] is None else entry[c] for c in COMPARE_COLUMNS] for entry in results),
        )
    return results

