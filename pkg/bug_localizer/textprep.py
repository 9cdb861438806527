"""
Text preprocessing and TF-IDF vector space for issue similarity.

Pipeline: camel-case/underscore split, lower casing, stop-word removal
against the frozen list in ``data/stopwords.txt``, Porter stemming.
"""

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from nltk.stem.porter import PorterStemmer
from scipy import sparse
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.metrics.pairwise import cosine_similarity

from bug_localizer.artifacts import write_csv
from bug_localizer.errors import EmptyCorpus

TokenList = List[str]

WORD_PATTERN = re.compile(r"[A-Za-z0-9]+")
# NullPointerException -> Null Pointer Exception; HTTPServer -> HTTP Server
CAMEL_PATTERN = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")

_STEMMER = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


@lru_cache(maxsize=None)
def stop_words() -> frozenset:
    """The bundled English stop-word list."""
    text = (
        resources.files("bug_localizer")
        .joinpath("data/stopwords.txt")
        .read_text(encoding="utf-8")
    )
    return frozenset(
        line.strip()
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    )


@lru_cache(maxsize=65536)
def _stem(word: str) -> str:
    return _STEMMER.stem(word)


def split_identifier(word: str) -> List[str]:
    """Split one alphanumeric word on camel-case and digit boundaries."""
    return CAMEL_PATTERN.findall(word)


def preprocess(text: str) -> TokenList:
    """
    Turn raw text into a list of stemmed index terms.

    Parameters
    ----------
    text : str
        Any text; may be empty.

    Returns
    -------
    list of str
        Lowercase Porter stems in text order. Stop words, single characters
        and pure numbers are dropped.
    """
    stops = stop_words()
    tokens = []
    for word in WORD_PATTERN.findall(text or ""):
        for part in split_identifier(word):
            token = part.lower()
            if len(token) < 2 or token.isdigit() or token in stops:
                continue
            tokens.append(_stem(token))
    return tokens


def as_tokens(doc: TokenList) -> TokenList:
    """Analyzer for vectorizers fed with already preprocessed token lists."""
    return doc


@dataclass
class VectorSpace:
    """
    TF-IDF space over a fixed document collection.

    Weights are raw term counts times the smoothed idf
    ``ln((1 + N) / (1 + df)) + 1``; every document vector is L2-normalized.
    Immutable once built.
    """

    doc_ids: Tuple[str, ...]
    matrix: sparse.csr_matrix
    vectorizer: Optional[TfidfVectorizer] = None

    def __post_init__(self) -> None:
        self._rows = {doc_id: row for row, doc_id in enumerate(self.doc_ids)}

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self._rows

    @property
    def vocabulary(self) -> Dict[str, int]:
        if self.vectorizer is None:
            return {}
        return {term: int(index) for term, index in self.vectorizer.vocabulary_.items()}

    @property
    def idf(self) -> Dict[str, float]:
        if self.vectorizer is None:
            return {}
        return {
            term: float(self.vectorizer.idf_[index])
            for term, index in self.vectorizer.vocabulary_.items()
        }

    def vector(self, doc_id: str) -> sparse.csr_matrix:
        return self.matrix[self._rows[doc_id]]

    def transform(self, tokens: TokenList) -> sparse.csr_matrix:
        """Vectorize a document that was not part of the collection."""
        if self.vectorizer is None:
            return sparse.csr_matrix((1, 0))
        return self.vectorizer.transform([tokens])


def build_tfidf(docs: Mapping[str, TokenList]) -> VectorSpace:
    """
    Fit a TF-IDF space on a collection of preprocessed documents.

    Raises
    ------
    EmptyCorpus
        If ``docs`` is empty.
    """
    if not docs:
        raise EmptyCorpus("Cannot build a vector space over zero documents")
    doc_ids = tuple(sorted(docs))
    if not any(docs[doc_id] for doc_id in doc_ids):
        # every document preprocessed to nothing: no vocabulary to fit
        return VectorSpace(doc_ids, sparse.csr_matrix((len(doc_ids), 0)))
    vectorizer = TfidfVectorizer(
        analyzer=as_tokens,
        lowercase=False,
        norm="l2",
        use_idf=True,
        smooth_idf=True,
        sublinear_tf=False,
    )
    matrix = vectorizer.fit_transform([docs[doc_id] for doc_id in doc_ids])
    return VectorSpace(doc_ids, sparse.csr_matrix(matrix), vectorizer)


def cosine(a, b) -> float:
    """
    Cosine similarity of two vectors from the same space, clipped to [0, 1].

    Returns 0 when either vector is all zero.
    """
    a = a if sparse.issparse(a) else np.atleast_2d(np.asarray(a, dtype=float))
    b = b if sparse.issparse(b) else np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[-1] == 0 or b.shape[-1] == 0:
        return 0.0
    value = float(cosine_similarity(a, b)[0, 0])
    return min(max(value, 0.0), 1.0)


def export_vocabulary(space: VectorSpace, path: "str | Path") -> Path:
    """Write ``term,index,idf`` rows for debugging."""
    idf = space.idf
    return write_csv(
        path,
        ["term", "index", "idf"],
        ((term, index, idf[term]) for term, index in sorted(space.vocabulary.items())),
    )
