"""Integration tests for the staged pipeline, report merging and run comparison."""

import pytest

from bug_localizer.artifacts import read_csv, read_json, read_score_tables, write_json
from bug_localizer.config import RunConfig, build_config
from bug_localizer.corpus import snapshot_files
from bug_localizer.errors import ConfigError, EmptySample, InsufficientOverlap, UnreadableSource
from bug_localizer.evaluation import METRICS
from bug_localizer.pipeline import (
    Pipeline,
    compare_runs,
    load_report_table,
    merge_reports,
    read_rankings,
    run_pipeline,
    snapshots_for,
)

pytest.importorskip("tree_sitter_java")

COMPOSERS = "fixed_weight,combsum,borda,corrb,lr"
RETRY = "src/main/java/org/demo/Retry.java"


def fixture_run_config(fixture_config, **overrides):
    return build_config(fixture_config, {"composers": COMPOSERS, **overrides})


def write_report(path, project, metrics_by_composer):
    return write_json(
        path,
        {
            "project": project,
            "composers": {
                name: {"aggregates": dict(zip(METRICS, values))}
                for name, values in metrics_by_composer.items()
            },
        },
    )


class TestIngest:
    """Test loading, eligibility and the split."""

    def test_split(self, fixture_config):
        """Test eligible bugs and the chronological split of the fixture project."""
        pipeline = Pipeline(fixture_run_config(fixture_config), quiet=True)

        dataset = pipeline.ingest()

        assert len(dataset.eligible) == 15
        assert len(dataset.train_ids) == 12
        assert dataset.test_ids == ["DEMO-17", "DEMO-18", "DEMO-19"]
        split = read_json(pipeline.workdir / "split.json")
        assert split["test"] == dataset.test_ids
        assert "DEMO-4" not in split["skipped"]

    def test_snapshots_match_replay(self, fixture_data):
        """Test that the single replay agrees with per-bug snapshots."""
        corpus, log, _ = fixture_data
        bugs = list(corpus.bugs())

        snapshots = snapshots_for(log, bugs)

        for bug in bugs:
            assert snapshots[bug.id].files == snapshot_files(log, bug.created_date).files

    def test_truth_csv_marks_added_files(self, fixture_config):
        """Test that files created by a fix are flagged in truth.csv."""
        pipeline = Pipeline(fixture_run_config(fixture_config), quiet=True)
        pipeline.ingest()

        rows = read_csv(pipeline.workdir / "truth.csv")

        assert {"bug_id": "DEMO-9", "file_path": RETRY, "newly_added": "1"} in rows
        assert pipeline.truth_statistics()["newly_added_files"] >= 1

    def test_exclude_added_policy(self, fixture_config):
        """Test that the exclude-added policy drops files created by the fix."""
        pipeline = Pipeline(fixture_run_config(fixture_config, truth_policy="exclude-added"), quiet=True)

        dataset = pipeline.ingest()

        assert RETRY not in dataset.truths["DEMO-9"]
        assert dataset.added["DEMO-9"] == frozenset({RETRY})

    def test_manifest(self, fixture_config):
        """Test that the manifest records version, seed and input hashes."""
        pipeline = Pipeline(fixture_run_config(fixture_config, seed=3), quiet=True)
        pipeline.ingest()

        manifest = read_json(pipeline.workdir / "run_manifest.json")

        assert manifest["version"] == "1.0.0"
        assert manifest["seed"] == 3
        assert manifest["inputs"]["issues"].startswith("sha256:")
        assert manifest["config"]["composers"] == COMPOSERS.split(",")

    def test_missing_inputs(self, tmp_path):
        """Test that a run without issues or commits is a configuration error."""
        with pytest.raises(ConfigError):
            Pipeline(RunConfig(workdir=str(tmp_path / "run")), quiet=True).ingest()

    def test_warnings(self, fixture_config, capsys):
        """Test that dangling links are reported on stderr."""
        Pipeline(fixture_run_config(fixture_config)).ingest()

        captured = capsys.readouterr()
        assert "🔍 Ingesting project DEMO" in captured.out
        assert "⚠️  Warning: Skipping link DEMO-99" in captured.err


class TestScoring:
    """Test the component stages."""

    def test_history_tables_respect_snapshots(self, fixture_config):
        """Test that every scored file existed when its bug was filed."""
        pipeline = Pipeline(fixture_run_config(fixture_config), quiet=True)

        tables = pipeline.score("history")

        snapshots = pipeline.dataset.snapshots
        assert sum(len(t) for t in tables) > 0
        for table in tables:
            assert set(table.scores) <= snapshots[table.bug_id].files
        assert (pipeline.workdir / "scores_history.csv").exists()

    def test_per_bug_structure_index(self, fixture_config):
        """Test structure scoring with one index per bug."""
        pipeline = Pipeline(fixture_run_config(fixture_config, snapshot_granularity="per_bug"), quiet=True)

        tables = pipeline.score("structure")

        assert [t.bug_id for t in tables] == pipeline.dataset.eligible
        for table in tables:
            assert set(table.scores) <= pipeline.dataset.snapshots[table.bug_id].files

    def test_trace_writes_vocabulary(self, fixture_config):
        """Test that trace scoring exports the TF-IDF vocabulary."""
        pipeline = Pipeline(fixture_run_config(fixture_config), quiet=True)

        pipeline.score("trace")

        stored = read_score_tables(pipeline.workdir / "scores_trace.csv")
        assert set(stored) <= set(pipeline.dataset.eligible)
        assert read_csv(pipeline.workdir / "vocabulary.csv")

    def test_bug_reports_baseline(self, fixture_config):
        """Test that the bug-reports-only baseline never exceeds full trace evidence."""
        pipeline = Pipeline(fixture_run_config(fixture_config), quiet=True)

        trace = {table.bug_id: table for table in pipeline.score("trace")}
        baseline = read_score_tables(pipeline.workdir / "scores_simi.csv")

        assert set(baseline) <= set(trace)
        for bug_id, table in baseline.items():
            for path, value in table.scores.items():
                assert value <= trace[bug_id].get(path) + 1e-12, (bug_id, path)
        baseline_total = sum(sum(t.scores.values()) for t in baseline.values())
        trace_total = sum(sum(t.scores.values()) for t in trace.values())
        assert baseline_total < trace_total

    def test_vector_space_only_sees_earlier_issues(self, fixture_config):
        """Test that the TF-IDF space of a bug is fitted on issues filed no later than it."""
        pipeline = Pipeline(fixture_run_config(fixture_config), quiet=True)
        corpus = pipeline.dataset.corpus
        query = corpus["DEMO-5"]

        space = pipeline.space_for(query)

        assert {"DEMO-1", "DEMO-4", "DEMO-5"} <= set(space.doc_ids)
        assert all(corpus[doc_id].created_date <= query.created_date for doc_id in space.doc_ids)
        assert "DEMO-6" not in space
        assert "lexer" in space.vocabulary
        assert "ledger" not in space.vocabulary
        assert "ledger" in pipeline.space_for(corpus["DEMO-19"]).vocabulary

    def test_unknown_component(self, fixture_config):
        """Test that only three components exist."""
        with pytest.raises(ConfigError):
            Pipeline(fixture_run_config(fixture_config), quiet=True).score("stack")

    def test_missing_sources(self, fixture_config, tmp_path):
        """Test that a missing sources directory cannot be indexed."""
        config = fixture_run_config(fixture_config, sources=str(tmp_path / "absent"))

        with pytest.raises(UnreadableSource):
            Pipeline(config, quiet=True).score("structure")

    def test_fuse_needs_scores(self, fixture_config):
        """Test that fusion without persisted score tables names the missing stage."""
        with pytest.raises(UnreadableSource, match="run 'score trace' first"):
            Pipeline(fixture_run_config(fixture_config), quiet=True).fuse()


class TestRun:
    """Test complete runs."""

    def test_report(self, fixture_config, capsys):
        """Test every composer is evaluated with five metrics in [0, 1]."""
        config = fixture_run_config(fixture_config)

        report = run_pipeline(config, quiet=True)

        assert capsys.readouterr().out == ""
        assert set(report["composers"]) == set(COMPOSERS.split(","))
        assert set(report["components"]) == {"trace", "history", "structure", "simi"}
        trace, simi = report["components"]["trace"], report["components"]["simi"]
        for metric in METRICS:
            gain = trace["aggregates"][metric] - simi["aggregates"][metric]
            assert report["trace_gain_over_simi"][metric] == pytest.approx(gain)
        for metrics in [*report["composers"].values(), *report["components"].values()]:
            assert set(metrics["aggregates"]) == set(METRICS)
            assert all(0.0 <= value <= 1.0 for value in metrics["aggregates"].values())
        assert report["split"] == {"train": 12, "test": 3}
        assert "lr" in read_json(f"{config.workdir}/models.json")
        rows = read_csv(f"{config.workdir}/report.csv")
        assert [row["COMPOSER"] for row in rows] == sorted(COMPOSERS.split(","))

    def test_rankings_cover_test_snapshots(self, fixture_config):
        """Test that each test bug ranks every file that existed when it was filed."""
        config = fixture_run_config(fixture_config)
        pipeline = Pipeline(config, quiet=True)
        pipeline.run()

        rankings = read_rankings(pipeline.workdir / "rankings_fixed_weight.csv")

        assert sorted(rankings) == pipeline.dataset.test_ids
        for bug_id, ranking in rankings.items():
            assert set(ranking.paths) == set(pipeline.dataset.snapshots[bug_id].files)
            scores = [score for _, score in ranking.candidates]
            assert scores == sorted(scores, reverse=True)

    def test_rerun_is_byte_identical(self, fixture_config):
        """Test that the same config and seed reproduce every ranking file."""
        config = fixture_run_config(fixture_config)
        names = [f"rankings_{name}.csv" for name in COMPOSERS.split(",")] + ["report.csv", "features.csv"]

        run_pipeline(config, quiet=True)
        first = {name: (fixture_config.parent / "run" / name).read_bytes() for name in names}
        run_pipeline(config, quiet=True)
        second = {name: (fixture_config.parent / "run" / name).read_bytes() for name in names}

        assert first == second

    def test_verbose(self, fixture_config, capsys):
        """Test that verbose runs echo the configuration and written files."""
        run_pipeline(fixture_run_config(fixture_config), verbose=True)

        out = capsys.readouterr().out
        assert "🔧 Configuration:" in out
        assert "wrote" in out
        assert "✅ DEMO fixed_weight: MAP" in out


class TestMergeAndCompare:
    """Test multi-project reports and their comparison."""

    @pytest.fixture
    def reports(self, tmp_path):
        paths = [
            write_report(tmp_path / "p1.json", "P1", {"borda": [0.2, 0.3, 0.1, 0.4, 0.5]}),
            write_report(tmp_path / "p2.json", "P2", {"borda": [0.4, 0.5, 0.3, 0.6, 0.7]}),
            write_report(tmp_path / "p3.json", "P3", {"borda": [0.1, 0.2, 0.0, 0.3, 0.3]}),
        ]
        return paths

    def test_merge(self, reports, tmp_path):
        """Test that merged rows are ordered by project and composer."""
        merged = merge_reports(list(reversed(reports)), tmp_path / "report.csv")

        rows = read_csv(merged)
        assert [row["PROJECT"] for row in rows] == ["P1", "P2", "P3"]
        assert float(rows[1]["MAP"]) == pytest.approx(0.4)

    def test_merge_nothing(self, tmp_path):
        """Test that merging no reports is refused."""
        with pytest.raises(EmptySample):
            merge_reports([], tmp_path / "report.csv")

    def test_self_comparison_ttest(self, reports, tmp_path):
        """Test that comparing a report with itself has zero variance everywhere."""
        merged = merge_reports(reports, tmp_path / "report.csv")

        results = compare_runs(merged, merged, "ttest", output=tmp_path / "comparison.csv")

        assert len(results) == len(METRICS)
        assert all(r["status"] == "zero_variance" and r["statistic"] is None for r in results)
        rows = read_csv(tmp_path / "comparison.csv")
        assert rows[0]["statistic"] == ""

    def test_self_comparison_ks(self, reports, tmp_path):
        """Test D 0 and p 1 when comparing a report with itself."""
        merged = merge_reports(reports, tmp_path / "report.csv")

        results = compare_runs(merged, merged, "ks")

        assert all(r["status"] == "ok" for r in results)
        assert all(r["statistic"] == 0.0 and r["pvalue"] == pytest.approx(1.0) for r in results)

    def test_shifted_run(self, reports, tmp_path):
        """Test a paired t-test between two runs with unequal gains."""
        merged = merge_reports(reports, tmp_path / "a.csv")
        better = merge_reports(
            [
                write_report(tmp_path / "b1.json", "P1", {"borda": [0.3, 0.4, 0.2, 0.5, 0.6]}),
                write_report(tmp_path / "b2.json", "P2", {"borda": [0.6, 0.7, 0.5, 0.8, 0.9]}),
                write_report(tmp_path / "b3.json", "P3", {"borda": [0.4, 0.5, 0.3, 0.6, 0.6]}),
            ],
            tmp_path / "b.csv",
        )

        results = compare_runs(better, merged, "ttest", composer="borda")

        map_result = next(r for r in results if r["metric"] == "MAP")
        assert map_result["statistic"] > 0
        assert 0.0 < map_result["pvalue"] < 1.0

    def test_too_few_projects(self, reports, tmp_path):
        """Test that two shared projects are not enough."""
        merged = merge_reports(reports[:2], tmp_path / "report.csv")

        with pytest.raises(InsufficientOverlap):
            compare_runs(merged, merged)

    def test_no_shared_composer(self, reports, tmp_path):
        """Test that reports without a common composer cannot be compared."""
        merged = merge_reports(reports, tmp_path / "a.csv")
        other = merge_reports(
            [write_report(tmp_path / f"o{i}.json", f"P{i}", {"lr": [0.1] * 5}) for i in range(1, 4)],
            tmp_path / "b.csv",
        )

        with pytest.raises(InsufficientOverlap):
            compare_runs(merged, other)

    def test_unknown_test(self, reports, tmp_path):
        """Test that only t-test and K-S are offered."""
        with pytest.raises(ConfigError):
            compare_runs(reports[0], reports[0], "wilcoxon")

    def test_json_report_table(self, reports):
        """Test reading a single-project report.json."""
        table = load_report_table(reports[0])

        assert table[("P1", "borda")]["Top10"] == pytest.approx(0.5)
