"""
Score tables and on-disk artifacts.

Every intermediate result of a run is persisted so composers can be
re-trained without re-scoring. Files are written to a temporary sibling and
moved into place, so readers never observe a half-written artifact.
"""

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Sequence, Tuple

TRACE = "susp_r"
HISTORY = "susp_h"
STRUCTURE = "susp_s"
COMPONENTS = (TRACE, HISTORY, STRUCTURE)
# trace evidence from bug reports alone; evaluated, never fused
SIMI = "susp_simi"

COMPONENT_NAMES = {TRACE: "trace", HISTORY: "history", STRUCTURE: "structure"}


@dataclass
class ScoreTable:
    """
    Per-file suspiciousness of one component for one query bug.

    Files missing from ``scores`` have an implicit score of 0.
    """

    bug_id: str
    component: str
    scores: Dict[str, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.scores)

    def __contains__(self, path: object) -> bool:
        return path in self.scores

    def get(self, path: str) -> float:
        return self.scores.get(path, 0.0)

    def items(self) -> List[Tuple[str, float]]:
        return sorted(self.scores.items())


def format_float(value: float) -> str:
    """Shortest round-tripping representation, stable across runs."""
    return repr(float(value))


def atomic_write_text(path: "str | Path", text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def write_csv(path: "str | Path", header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return atomic_write_text(path, buffer.getvalue())


def read_csv(path: "str | Path") -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def write_json(path: "str | Path", data: Any) -> Path:
    return atomic_write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_json(path: "str | Path") -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_score_tables(path: "str | Path", tables: Iterable[ScoreTable], component: str) -> Path:
    """Persist tables as ``bug_id,file_path,<component>`` rows ordered by bug and path."""
    ordered = sorted(tables, key=lambda t: t.bug_id)
    return write_csv(
        path,
        ["bug_id", "file_path", component],
        ((t.bug_id, p, s) for t in ordered for p, s in t.items()),
    )


def read_score_tables(path: "str | Path") -> Dict[str, ScoreTable]:
    tables: Dict[str, ScoreTable] = {}
    rows = read_csv(path)
    if not rows:
        return tables
    component = [name for name in rows[0] if name not in ("bug_id", "file_path")][0]
    for row in rows:
        table = tables.setdefault(row["bug_id"], ScoreTable(row["bug_id"], component))
        table.scores[row["file_path"]] = float(row[component])
    return tables


def _iter_tree(root: Path) -> Iterator[Path]:
    for path in sorted(root.rglob("*")):
        if path.is_file() and ".git" not in path.relative_to(root).parts:
            yield path


def input_hash(path: "str | Path") -> str:
    """SHA-256 of a file, or of every file below a directory (``.git`` excluded)."""
    path = Path(path)
    digest = hashlib.sha256()
    if path.is_dir():
        for child in _iter_tree(path):
            digest.update(str(child.relative_to(path)).encode("utf-8"))
            digest.update(child.read_bytes())
    else:
        digest.update(path.read_bytes())
    return digest.hexdigest()
