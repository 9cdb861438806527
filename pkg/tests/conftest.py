"""Pytest configuration and fixtures for bug-localizer tests."""

import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import pytest

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

DAY = 86400
T0 = 1_600_000_000
PACKAGE_DIR = "src/main/java/org/demo"

WORDS = [
    "Parser", "Lexer", "Token", "Scanner", "Cache", "Buffer", "Socket", "Session",
    "Router", "Handler", "Config", "Logger", "Queue", "Worker", "Scheduler", "Timer",
    "Account", "Ledger", "Invoice", "Payment", "Report", "Export", "Import", "Index",
    "Search", "Query", "Render", "Layout", "Widget", "Theme",
]  # fmt: skip

ISSUE_COUNT = 20


def java_path(word):
    return f"{PACKAGE_DIR}/{word}.java"


def java_source(word):
    lower = word.lower()
    return (
        "package org.demo;\n"
        "\n"
        "/**\n"
        f" * Handles {lower} processing.\n"
        " */\n"
        f"public class {word} {{\n"
        f"    private int {lower}Count;\n"
        "\n"
        f"    public void process{word}(String input) {{\n"
        f"        // validate the {lower} input\n"
        "        int length = input.length();\n"
        f"        {lower}Count += length;\n"
        "    }\n"
        "}\n"
    )


def iso(timestamp):
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).isoformat().replace("+00:00", "Z")


def commit_hash(name):
    return hashlib.sha1(name.encode("utf-8")).hexdigest()


def issue_dates(j):
    created = T0 + 10 * j * DAY
    return created, created + 15 * DAY


def issue_files(j):
    """Files touched by the first and the second fix commit of issue j."""
    return WORDS[j % 30], WORDS[(7 * j) % 30]


def is_feature(j):
    return j % 4 == 0


def _modified(path):
    return {"old": path, "new": path, "kind": "M"}


def fixture_issues():
    issues = []
    for j in range(1, ISSUE_COUNT + 1):
        created, resolved = issue_dates(j)
        first, second = issue_files(j)
        record = {
            "id": f"DEMO-{j}",
            "kind": "feature" if is_feature(j) else "bug",
            "summary": f"{first} fails while processing {second.lower()} input",
            "description": (
                f"The {first.lower()} component throws an exception when the "
                f"{second.lower()} count overflows."
            ),
            "created_date": iso(created),
            "resolved_date": iso(resolved),
            "links": "DEMO-10" if j == 11 else "",
        }
        issues.append(record)
    return issues


def fixture_commits():
    """Fifty commits: initial import, nine maintenance commits, two per issue."""
    commits = [
        {
            "hash": commit_hash("initial"),
            "timestamp": T0,
            "message": "Initial import",
            "changes": [{"old": None, "new": java_path(w), "kind": "A"} for w in WORDS]
            + [{"old": None, "new": "README.md", "kind": "A"}],
        }
    ]
    maintenance = [
        (1, "Update README", [_modified("README.md")]),
        (33, "Refactor Cache internals", [_modified(java_path("Cache"))]),
        (55, "Rename Layout to PageLayout", [
            {"old": java_path("Layout"), "new": java_path("PageLayout"), "kind": "R"}
        ]),
        (77, "Remove unused Index", [{"old": java_path("Index"), "new": None, "kind": "D"}]),
        (99, "Add Pager", [{"old": None, "new": java_path("Pager"), "kind": "A"}]),
        (121, "Tidy parser and query", [_modified(java_path("Parser")), _modified(java_path("Query"))]),
        (143, "Document config keys", [_modified("README.md"), _modified(java_path("Config"))]),
        (165, "Bump build", [_modified("build.gradle")]),
        (187, "Polish pager", [_modified(java_path("Pager"))]),
    ]  # fmt: skip
    for day, message, changes in maintenance:
        commits.append(
            {
                "hash": commit_hash(message),
                "timestamp": T0 + day * DAY + 3600,
                "message": message,
                "changes": changes,
            }
        )
    for j in range(1, ISSUE_COUNT + 1):
        created, resolved = issue_dates(j)
        first, second = issue_files(j)
        verb = "implement" if is_feature(j) else "fix"
        commits.append(
            {
                "hash": commit_hash(f"DEMO-{j}-a"),
                "timestamp": created + 2 * DAY,
                "message": f"DEMO-{j} {verb} {first.lower()} handling",
                "changes": [_modified(java_path(first))],
            }
        )
        changes = [_modified(java_path(second))]
        if j == 9:
            changes.append({"old": None, "new": java_path("Retry"), "kind": "A"})
        message = f"DEMO-{j}: follow-up for {second.lower()}"
        if j == 6:
            message = f"Follow-up cleanup for {second.lower()}"
        commits.append(
            {
                "hash": commit_hash(f"DEMO-{j}-b"),
                "timestamp": resolved - DAY,
                "message": message,
                "changes": changes,
            }
        )
    return commits


def final_files():
    files = {java_path(w) for w in WORDS}
    files -= {java_path("Layout"), java_path("Index")}
    files |= {java_path("PageLayout"), java_path("Pager"), java_path("Retry")}
    return sorted(files)


def write_fixture_corpus(root):
    """Write issues, commits, links, sources and a config file below ``root``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "issues.jsonl", "w", encoding="utf-8") as f:
        for record in fixture_issues():
            f.write(json.dumps(record) + "\n")
    with open(root / "commits.jsonl", "w", encoding="utf-8") as f:
        for record in fixture_commits():
            f.write(json.dumps(record) + "\n")
    (root / "links.csv").write_text(
        "issue_id,commit_hash\n"
        f"DEMO-6,{commit_hash('DEMO-6-b')}\n"
        f"DEMO-99,{commit_hash('missing')}\n",
        encoding="utf-8",
    )
    for path in final_files():
        target = root / "sources" / path
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(java_source(Path(path).stem), encoding="utf-8")
    (root / "run.cfg").write_text(
        "# fixture project\n"
        f"issues={root / 'issues.jsonl'}\n"
        f"commits={root / 'commits.jsonl'}\n"
        f"links={root / 'links.csv'}\n"
        f"sources={root / 'sources'}\n"
        f"workdir={root / 'run'}\n"
        "project=DEMO\n"
        "workers=2\n",
        encoding="utf-8",
    )
    return root


@pytest.fixture
def test_data_dir():
    """Return the path to the test data directory."""
    return Path(__file__).parent / "test_data"


@pytest.fixture
def fixture_root(tmp_path):
    """A freshly generated fixture project."""
    return write_fixture_corpus(tmp_path / "demo")


@pytest.fixture
def fixture_config(fixture_root):
    """Path to the fixture project's key=value config file."""
    return fixture_root / "run.cfg"


@pytest.fixture
def fixture_data(fixture_root):
    """Loaded fixture corpus, commit log and trace index."""
    from bug_localizer.corpus import link_issues_commits, load_commits, load_issues, load_links

    corpus = load_issues(fixture_root / "issues.jsonl")
    log = load_commits(fixture_root / "commits.jsonl")
    index = link_issues_commits(corpus, log, load_links(fixture_root / "links.csv"))
    return corpus, log, index
