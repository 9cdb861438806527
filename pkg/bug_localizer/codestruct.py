"""
Code-structure component (Susp^S).

Source files are split into four fields (type names, method names, variable
names, comments) with tree-sitter grammars. The summary and the description
of a bug report are run as two separate queries against each field, and the
eight Okapi BM25 scores are summed.
"""

import re
import threading
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy import sparse
from sklearn.feature_extraction.text import CountVectorizer

from bug_localizer.artifacts import STRUCTURE, ScoreTable
from bug_localizer.corpus import CommitLog, FileSnapshot, IssueReport, source_language
from bug_localizer.errors import EmptyIndex, UnknownLanguage
from bug_localizer.textprep import TokenList, as_tokens, preprocess

LANGUAGES = ("java", "python")
FIELDS = ("type_names", "method_names", "variable_names", "comments")
QUERY_PARTS = ("summary", "description")

IDENTIFIER_PATTERN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")

JAVA_TYPE_NODES = {
    "class_declaration",
    "interface_declaration",
    "enum_declaration",
    "record_declaration",
    "annotation_type_declaration",
}
JAVA_METHOD_NODES = {"method_declaration", "constructor_declaration", "compact_constructor_declaration"}
JAVA_VARIABLE_NODES = {"variable_declarator", "formal_parameter", "catch_formal_parameter"}
JAVA_COMMENT_NODES = {"line_comment", "block_comment", "comment"}

PYTHON_ASSIGNMENT_NODES = {"assignment", "augmented_assignment", "for_statement"}
PYTHON_IMPLICIT_PARAMETERS = {"self", "cls"}

_local = threading.local()


@dataclass(frozen=True)
class CodeFields:
    file: str
    type_names: TokenList = field(default_factory=list)
    method_names: TokenList = field(default_factory=list)
    variable_names: TokenList = field(default_factory=list)
    comments: TokenList = field(default_factory=list)

    def field_tokens(self, name: str) -> TokenList:
        return getattr(self, name)


def _parser(language: str):
    """One tree-sitter parser per thread and language."""
    parsers = getattr(_local, "parsers", None)
    if parsers is None:
        parsers = _local.parsers = {}
    if language not in parsers:
        from tree_sitter import Language, Parser

        if language == "java":
            import tree_sitter_java as grammar
        else:
            import tree_sitter_python as grammar
        parsers[language] = Parser(Language(grammar.language()))
    return parsers[language]


def _text(node) -> str:
    return node.text.decode("utf-8", errors="ignore") if node is not None else ""


def _walk(node) -> Iterator:
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(current.children))


def _java_fields(root) -> Dict[str, List[str]]:
    found: Dict[str, List[str]] = {name: [] for name in FIELDS}
    for node in _walk(root):
        if node.type in JAVA_TYPE_NODES:
            found["type_names"].append(_text(node.child_by_field_name("name")))
        elif node.type in JAVA_METHOD_NODES:
            found["method_names"].append(_text(node.child_by_field_name("name")))
        elif node.type in JAVA_VARIABLE_NODES:
            found["variable_names"].append(_text(node.child_by_field_name("name")))
        elif node.type in JAVA_COMMENT_NODES:
            found["comments"].append(_text(node))
    return found


def _python_targets(node) -> Iterator[str]:
    """Names bound by an assignment target; ``self.count`` binds ``count``."""
    if node is None:
        return
    if node.type == "identifier":
        yield _text(node)
    elif node.type == "attribute":
        yield from _python_targets(node.child_by_field_name("attribute"))
    elif node.type == "subscript":
        yield from _python_targets(node.child_by_field_name("value"))
    else:
        for child in node.named_children:
            yield from _python_targets(child)


def _python_parameters(node) -> Iterator[str]:
    for child in node.named_children:
        if child.type == "identifier":
            name = _text(child)
        elif child.child_by_field_name("name") is not None:
            name = _text(child.child_by_field_name("name"))
        else:
            identifiers = [c for c in child.named_children if c.type == "identifier"]
            name = _text(identifiers[0]) if identifiers else ""
        if name and name not in PYTHON_IMPLICIT_PARAMETERS:
            yield name


def _is_docstring(node) -> bool:
    return (
        node.type == "expression_statement"
        and node.named_child_count == 1
        and node.named_children[0].type == "string"
    )


def _python_fields(root) -> Dict[str, List[str]]:
    found: Dict[str, List[str]] = {name: [] for name in FIELDS}
    for node in _walk(root):
        if node.type == "class_definition":
            found["type_names"].append(_text(node.child_by_field_name("name")))
        elif node.type == "function_definition":
            found["method_names"].append(_text(node.child_by_field_name("name")))
        elif node.type == "parameters":
            found["variable_names"].extend(_python_parameters(node))
        elif node.type in PYTHON_ASSIGNMENT_NODES:
            found["variable_names"].extend(_python_targets(node.child_by_field_name("left")))
        elif node.type == "comment" or _is_docstring(node):
            found["comments"].append(_text(node))
    return found


def _fallback_fields(file_content: str, path: str) -> CodeFields:
    identifiers = IDENTIFIER_PATTERN.findall(file_content)
    return CodeFields(file=path, variable_names=preprocess(" ".join(identifiers)))


def extract_fields(file_content: str, language: str, path: str = "") -> CodeFields:
    """
    Split a source file into preprocessed identifier and comment fields.

    Parameters
    ----------
    file_content : str
        Source text.
    language : {"java", "python"}
        Grammar to parse with.
    path : str, optional
        File path recorded on the result.

    Returns
    -------
    CodeFields
        When the grammar reports a syntax error, every identifier of the file
        is placed in ``variable_names`` and the other fields stay empty.

    Raises
    ------
    UnknownLanguage
        If no grammar exists for ``language``.
    """
    if language not in LANGUAGES:
        raise UnknownLanguage(f"No grammar for language {language!r}")
    if not file_content.strip():
        return CodeFields(file=path)
    tree = _parser(language).parse(file_content.encode("utf-8"))
    if tree.root_node.has_error:
        return _fallback_fields(file_content, path)
    found = _java_fields(tree.root_node) if language == "java" else _python_fields(tree.root_node)
    return CodeFields(
        file=path,
        **{name: preprocess(" ".join(found[name])) for name in FIELDS},
    )


def extract_path_fields(path: str, file_content: str) -> CodeFields:
    """Like :func:`extract_fields`, choosing the grammar from the file name."""
    language = source_language(path)
    if language is None:
        return _fallback_fields(file_content, path)
    return extract_fields(file_content, language, path)


class FieldIndex:
    """
    Okapi BM25 statistics over one field of every indexed file.

    The idf is ``ln(1 + (N - df + 0.5) / (df + 0.5))`` clamped at 0.
    """

    def __init__(self, docs: Sequence[TokenList], k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b
        self.size = len(docs)
        if any(docs):
            vectorizer = CountVectorizer(analyzer=as_tokens, lowercase=False)
            self.matrix = sparse.csr_matrix(vectorizer.fit_transform(docs), dtype=float)
            self.vocabulary = {t: int(i) for t, i in vectorizer.vocabulary_.items()}
        else:
            self.matrix = sparse.csr_matrix((self.size, 0), dtype=float)
            self.vocabulary = {}

        df = np.asarray((self.matrix > 0).sum(axis=0)).ravel()
        self.idf = np.maximum(0.0, np.log1p((self.size - df + 0.5) / (df + 0.5)))
        lengths = np.asarray(self.matrix.sum(axis=1)).ravel()
        avgdl = lengths.mean() if self.size and lengths.mean() > 0 else 1.0
        self.length_norm = k1 * (1.0 - b + b * lengths / avgdl)

    def score(self, tokens: TokenList) -> np.ndarray:
        counts = Counter(t for t in tokens if t in self.vocabulary)
        if not counts:
            return np.zeros(self.size)
        terms = sorted(counts)
        columns = np.array([self.vocabulary[t] for t in terms])
        query_tf = np.array([counts[t] for t in terms], dtype=float)
        hits = self.matrix[:, columns].tocoo()
        tf = hits.data
        contribution = (
            query_tf[hits.col]
            * self.idf[columns][hits.col]
            * tf
            * (self.k1 + 1.0)
            / (tf + self.length_norm[hits.row])
        )
        return np.bincount(hits.row, weights=contribution, minlength=self.size)


@dataclass
class StructuredIndex:
    """Four BM25 field indexes sharing one file id list."""

    file_ids: Tuple[str, ...]
    fields: Dict[str, FieldIndex]
    as_of: Optional[int] = None

    def __len__(self) -> int:
        return len(self.file_ids)


def build_structured_index(
    documents: Iterable[CodeFields],
    k1: float = 1.2,
    b: float = 0.75,
    as_of: Optional[int] = None,
) -> StructuredIndex:
    ordered = sorted(documents, key=lambda d: d.file)
    return StructuredIndex(
        file_ids=tuple(d.file for d in ordered),
        fields={
            name: FieldIndex([d.field_tokens(name) for d in ordered], k1=k1, b=b)
            for name in FIELDS
        },
        as_of=as_of,
    )


class DirectorySource:
    """
    File contents from a checkout directory.

    Contents do not change with time; a snapshot of an older revision sees
    today's text of every file that existed back then, and files missing
    from the checkout read as empty.
    """

    def __init__(self, root: "str | Path"):
        self.root = Path(root)

    def read(self, path: str, as_of: int) -> str:
        candidate = self.root / path
        if not candidate.is_file():
            return ""
        return candidate.read_text(encoding="utf-8", errors="ignore")


class GitSource:
    """File contents as of the last commit strictly before the snapshot time."""

    def __init__(self, repo_path: "str | Path", log: CommitLog):
        from git import Repo

        self.repo = Repo(str(repo_path))
        self.log = log

    def read(self, path: str, as_of: int) -> str:
        from git.exc import GitCommandError

        commit = self.log.last_before(as_of)
        if commit is None:
            return ""
        try:
            return self.repo.git.show(f"{commit.hash}:{path}")
        except GitCommandError:
            return ""


def index_snapshot(
    snapshot: FileSnapshot,
    source,
    k1: float = 1.2,
    b: float = 0.75,
) -> StructuredIndex:
    """
    Index every file of a snapshot.

    Raises
    ------
    EmptyIndex
        If the snapshot holds no file.
    """
    if not snapshot.files:
        raise EmptyIndex(f"No source files exist before {snapshot.as_of}")
    documents = [
        extract_path_fields(path, source.read(path, snapshot.as_of))
        for path in sorted(snapshot.files)
    ]
    return build_structured_index(documents, k1=k1, b=b, as_of=snapshot.as_of)


def pair_scores(query: IssueReport, index: StructuredIndex) -> Dict[Tuple[str, str], np.ndarray]:
    """BM25 score arrays for each (query part, field) pair, aligned with ``index.file_ids``."""
    parts = {"summary": preprocess(query.summary), "description": preprocess(query.description)}
    return {
        (part, name): index.fields[name].score(parts[part])
        for part in QUERY_PARTS
        for name in FIELDS
    }


def structure_score(
    query: IssueReport,
    index: StructuredIndex,
    candidates: Optional[Set[str]] = None,
) -> ScoreTable:
    """
    Sum the eight query/field BM25 scores per file.

    Parameters
    ----------
    query : IssueReport
        Bug report; summary and description are separate queries.
    index : StructuredIndex
        Index built over the files existing when the query was filed, or
        over a wider window that ``candidates`` narrows down.
    candidates : set of str, optional
        Restrict scored files to this set.

    Raises
    ------
    EmptyIndex
        If the index holds no file.
    """
    if not len(index):
        raise EmptyIndex("Cannot score against an empty structured index")
    total = np.sum(list(pair_scores(query, index).values()), axis=0)
    table = ScoreTable(bug_id=query.id, component=STRUCTURE)
    for path, score in zip(index.file_ids, total):
        if score > 0 and (candidates is None or path in candidates):
            table.scores[path] = float(score)
    return table
