"""CLI for running and comparing bug localization experiments."""

import argparse
import os
import sys
from typing import Any, Dict, List, NoReturn, Optional

from bug_localizer import __version__
from bug_localizer.composer import ComposerKind
from bug_localizer.config import RunConfig, build_config
from bug_localizer.errors import BugLocalizerError
from bug_localizer.pipeline import COMPARE_TESTS, Pipeline, compare_runs, merge_reports

CONFIG_ENV = "BUG_LOCALIZER_CONFIG"
COMPONENT_CHOICES = ("trace", "history", "structure")


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the configuration error status 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(1, f"❌ ERROR: {self.prog}: {message}\n")


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    """Options shared by every subcommand that works on one project."""
    parser.add_argument(
        "--config",
        metavar="FILE",
        help=(
            "Run configuration: flat key=value text, or a flat .yaml mapping. "
            f"Can also be set via the {CONFIG_ENV} environment variable."
        ),
    )
    parser.add_argument("--issues", metavar="FILE", help="Issue export (.jsonl or .csv)")
    parser.add_argument("--commits", metavar="PATH", help="Commit export (.jsonl) or git repository")
    parser.add_argument("--links", metavar="FILE", help="Explicit issue_id,commit_hash links (.csv)")
    parser.add_argument("--sources", metavar="DIR", help="Source checkout or git repository for code structure")
    parser.add_argument("--workdir", metavar="DIR", help="Directory receiving every run artifact")
    parser.add_argument("--project", metavar="NAME", help="Project name used in reports")
    parser.add_argument(
        "--cutoff",
        dest="cutoff_mode",
        choices=("relaxed", "strict"),
        help="Trace evidence cut-off: issues resolved before the bug was filed only (strict) or within the year around it (relaxed)",
    )
    parser.add_argument(
        "--composer",
        dest="composers",
        metavar="NAMES",
        help=(
            "Composer(s), comma separated: "
            + ", ".join(kind.value for kind in ComposerKind)
        ),
    )
    parser.add_argument("--seed", type=int, help="Seed for under-sampling and supervised composers")
    parser.add_argument(
        "--allow-leakage",
        action="store_true",
        default=None,
        help="Permit history scores to read commits made after a bug was filed",
    )
    parser.add_argument(
        "--bugcache-cutoff",
        choices=("created", "resolved"),
        help="Date of the query bug that ends the history window (resolved needs --allow-leakage)",
    )
    parser.add_argument(
        "--truth-policy",
        choices=("all", "exclude-added"),
        help="Ground truth: all changed files, or leave out files created by the fix",
    )
    parser.add_argument("--workers", type=int, help="Size of the per-bug scoring worker pool")
    parser.add_argument("-q", "--quiet", action="store_true", help="Silent mode: no output, just exit codes")
    parser.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        help="Verbose mode: show configuration, per-stage progress and written artifacts",
    )


def create_parser() -> argparse.ArgumentParser:
    """
    Create and configure the argument parser.

    Returns
    -------
    argparse.ArgumentParser
        Configured argument parser for the CLI
    """
    parser = ArgumentParser(
        prog="bug-localizer",
        description=(
            "Rank source files by their likelihood of fixing a bug report.\n\n"
            "Combines trace evidence from previously fixed issues, recent bug-fix history "
            "and code structure retrieval, then evaluates the rankings.\n\n"
            "Configuration precedence: command line flags > config file > built-in defaults."
        ),
        epilog=(
            "Examples:\n"
            "  %(prog)s run --config project.cfg\n"
            "      Ingest, score, fuse and evaluate one project\n\n"
            "  %(prog)s run --config project.cfg --cutoff strict --composer fixed_weight,rf --seed 7\n"
            "      Strict trace cut-off, two composers\n\n"
            "  %(prog)s score history --config project.cfg\n"
            "      Recompute one component's score table\n\n"
            "  %(prog)s report runs/*/report.json -o all.csv\n"
            "      Merge per-project reports\n\n"
            "  %(prog)s compare strict.csv relaxed.csv --test ks\n"
            "      Compare two multi-project reports\n"
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
        help="Show program version and exit",
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    for name, help_text in (
        ("run", "Run every stage"),
        ("ingest", "Load inputs, derive ground truth and the train/test split"),
        ("fuse", "Combine persisted score tables into rankings"),
        ("evaluate", "Evaluate persisted rankings"),
    ):
        _add_run_options(commands.add_parser(name, help=help_text))

    score = commands.add_parser("score", help="Score every eligible bug with one component")
    score.add_argument("component", choices=COMPONENT_CHOICES)
    _add_run_options(score)

    report = commands.add_parser("report", help="Merge report.json files into one multi-project report.csv")
    report.add_argument("reports", nargs="+", metavar="REPORT", help="report.json files")
    report.add_argument("-o", "--output", default="report.csv", metavar="FILE", help="Output CSV (default: report.csv)")
    report.add_argument("-q", "--quiet", action="store_true", help="Silent mode: no output, just exit codes")
    report.add_argument("-v", "--verbose", action="store_true", help="Verbose mode")

    compare = commands.add_parser("compare", help="Compare two multi-project reports")
    compare.add_argument("report_a", metavar="REPORT_A")
    compare.add_argument("report_b", metavar="REPORT_B")
    compare.add_argument("--test", choices=COMPARE_TESTS, default="ttest", help="Statistical test (default: ttest)")
    compare.add_argument("--composer", metavar="NAME", help="Compare a single composer")
    compare.add_argument("-o", "--output", default="comparison.csv", metavar="FILE", help="Output CSV (default: comparison.csv)")
    compare.add_argument("-q", "--quiet", action="store_true", help="Silent mode: no output, just exit codes")
    compare.add_argument("-v", "--verbose", action="store_true", help="Verbose mode")

    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Flag values that override the config file; unset flags stay None."""
    names = (
        "issues",
        "commits",
        "links",
        "sources",
        "workdir",
        "project",
        "cutoff_mode",
        "composers",
        "seed",
        "allow_leakage",
        "bugcache_cutoff",
        "truth_policy",
        "workers",
    )
    return {name: getattr(args, name, None) for name in names}


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Config file (flag, then environment variable) layered under the flags."""
    path = args.config or os.environ.get(CONFIG_ENV) or None
    return build_config(path, _overrides(args))


def _print_comparison(results: List[Dict[str, Any]]) -> None:
    for entry in results:
        if entry["status"] == "ok":
            print(
                f"   {entry['composer']:<14} {entry['metric']:<6} "
                f"statistic={entry['statistic']:.4f} p={entry['pvalue']:.4f}"
            )
        else:
            print(f"   {entry['composer']:<14} {entry['metric']:<6} {entry['status']}")


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "report":
        output = merge_reports(args.reports, args.output)
        if not args.quiet:
            print(f"✅ Merged {len(args.reports)} report(s) into {output}")
        return 0

    if args.command == "compare":
        results = compare_runs(args.report_a, args.report_b, args.test, args.composer, args.output)
        if not args.quiet:
            print(f"🔍 Comparing {args.report_a} against {args.report_b} ({args.test})")
            _print_comparison(results)
            print(f"✅ Wrote {args.output}")
        return 0

    pipeline = Pipeline(load_run_config(args), quiet=args.quiet, verbose=args.verbose)
    if args.command == "run":
        pipeline.run()
    elif args.command == "ingest":
        pipeline.ingest()
    elif args.command == "score":
        pipeline.score(args.component)
    elif args.command == "fuse":
        pipeline.fuse()
    elif args.command == "evaluate":
        pipeline.evaluate()
    if not args.quiet:
        print(f"✅ Artifacts in {pipeline.workdir}")
    return 0


def main(argv: Optional[List[str]] = None) -> None:
    """
    Main entry point for the script.

    Exit status is 0 on success, 1 for configuration errors, 2 for data
    errors and 3 when an internal invariant (such as the leakage audit)
    trips.

    Parameters
    ----------
    argv : list of str, optional
        Command line arguments. If None, defaults to sys.argv[1:]
    """
    parser = create_parser()
    args = parser.parse_args(argv)

    if args.quiet and args.verbose:
        print(
            "❌ ERROR: --quiet and --verbose are mutually exclusive options.",
            file=sys.stderr,
        )
        sys.exit(1)

    try:
        exit_code = _dispatch(args)
    except BugLocalizerError as e:
        if not args.quiet:
            print(f"❌ ERROR: {e}", file=sys.stderr)
        exit_code = e.exit_code

    sys.exit(exit_code)


if __name__ == "__main__":
    main()
