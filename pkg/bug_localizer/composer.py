"""
Fusion of the three component scores into one ranking per query bug.

Ten composers are available: a fixed-weight linear blend, the CombSUM /
CombMNZ / CombANZ family, CorrB, Borda count, and four supervised
classifiers (logistic regression, decision tree, random forest, multi-layer
perceptron) ranking files by their predicted probability of being buggy.
"""

import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.ensemble import RandomForestClassifier
from sklearn.linear_model import SGDClassifier
from sklearn.neural_network import MLPClassifier
from sklearn.tree import DecisionTreeClassifier

from bug_localizer.artifacts import COMPONENTS, HISTORY, STRUCTURE, TRACE, ScoreTable
from bug_localizer.corpus import FileSnapshot, IssueReport
from bug_localizer.errors import (
    EmptySnapshot,
    InvalidFusionSpec,
    NonFiniteFeatures,
    SingleClass,
    TooFewBugs,
)


class ComposerKind(str, Enum):
    FIXED_WEIGHT = "fixed_weight"
    COMBSUM = "combsum"
    COMBMNZ = "combmnz"
    COMBANZ = "combanz"
    CORRB = "corrb"
    BORDA = "borda"
    LR = "lr"
    DT = "dt"
    RF = "rf"
    MLP = "mlp"

    @property
    def supervised(self) -> bool:
        return self in SUPERVISED


SUPERVISED = {ComposerKind.LR, ComposerKind.DT, ComposerKind.RF, ComposerKind.MLP}


class Normalization(str, Enum):
    MINMAX_PER_QUERY = "minmax_per_query"
    NONE = "none"


@dataclass(frozen=True)
class FeatureRow:
    bug_id: str
    file_path: str
    susp_r: float
    susp_h: float
    susp_s: float
    label: bool = False

    @property
    def features(self) -> Tuple[float, float, float]:
        return (self.susp_r, self.susp_h, self.susp_s)


@dataclass(frozen=True)
class RankedList:
    """
    Candidate files of one query bug, best first.

    Order is descending score with ties broken by ascending path.
    """

    bug_id: str
    candidates: Tuple[Tuple[str, float], ...] = ()

    @classmethod
    def from_scores(cls, bug_id: str, scores: Mapping[str, float]) -> "RankedList":
        ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
        return cls(bug_id, tuple((path, float(score)) for path, score in ordered))

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def paths(self) -> List[str]:
        return [path for path, _ in self.candidates]

    def rank_of(self, path: str) -> Optional[int]:
        for rank, (candidate, _) in enumerate(self.candidates, 1):
            if candidate == path:
                return rank
        return None


@dataclass(frozen=True)
class FusionSpec:
    """
    A composer and its parameters.

    Parameters
    ----------
    kind : ComposerKind
    params : mapping
        ``a``/``b`` for fixed_weight, ``top_n`` for corrb, ``seed`` (mandatory
        for supervised composers) and any estimator hyperparameter under
        ``hyper``.
    normalization : Normalization
        Applied to every composer except Borda, which only uses ranks.
    """

    kind: ComposerKind
    params: Mapping[str, Any] = field(default_factory=dict)
    normalization: Normalization = Normalization.MINMAX_PER_QUERY

    def __post_init__(self) -> None:
        if self.kind is ComposerKind.FIXED_WEIGHT:
            for name in ("a", "b"):
                value = self.params.get(name, 0.2 if name == "a" else 0.3)
                if not 0.0 <= float(value) <= 1.0:
                    raise InvalidFusionSpec(f"fixed_weight parameter {name}={value} not in [0, 1]")
        if self.kind is ComposerKind.CORRB and int(self.params.get("top_n", 10)) < 1:
            raise InvalidFusionSpec("corrb top_n must be at least 1")
        if self.kind.supervised and self.params.get("seed") is None:
            raise InvalidFusionSpec(f"composer {self.kind.value} requires a seed")

    @property
    def name(self) -> str:
        return self.kind.value


def assemble_features(
    query: IssueReport,
    tables: Mapping[str, ScoreTable],
    snapshot: FileSnapshot,
    truth: "set | frozenset",
) -> List[FeatureRow]:
    """
    One row per file existing when the query was filed.

    Scores missing from a component table are 0; the label marks files
    changed by the query's fix.

    Raises
    ------
    EmptySnapshot
        If no file existed when the query was filed.
    """
    if not snapshot.files:
        raise EmptySnapshot(f"No source files exist before {query.id} was filed")
    empty = ScoreTable(query.id, "")
    trace = tables.get(TRACE, empty)
    history = tables.get(HISTORY, empty)
    structure = tables.get(STRUCTURE, empty)
    return [
        FeatureRow(
            bug_id=query.id,
            file_path=path,
            susp_r=trace.get(path),
            susp_h=history.get(path),
            susp_s=structure.get(path),
            label=path in truth,
        )
        for path in sorted(snapshot.files)
    ]


def feature_matrix(rows: Sequence[FeatureRow]) -> np.ndarray:
    """Rows as an ``(n, 3)`` array with columns susp_r, susp_h, susp_s."""
    return np.array([row.features for row in rows], dtype=float).reshape(len(rows), len(COMPONENTS))


def normalize_per_query(rows: Sequence[FeatureRow]) -> List[FeatureRow]:
    """Min-max scale each component to [0, 1]; constant columns become 0."""
    if not rows:
        return []
    matrix = feature_matrix(rows)
    low = matrix.min(axis=0)
    span = matrix.max(axis=0) - low
    scaled = np.where(span > 0, (matrix - low) / np.where(span > 0, span, 1.0), 0.0)
    return [
        replace(row, susp_r=float(r), susp_h=float(h), susp_s=float(s))
        for row, (r, h, s) in zip(rows, scaled)
    ]


def _ranked(rows: Sequence[FeatureRow], scores: np.ndarray) -> RankedList:
    bug_id = rows[0].bug_id if rows else ""
    return RankedList.from_scores(bug_id, {row.file_path: float(s) for row, s in zip(rows, scores)})


def fuse_fixed(rows: Sequence[FeatureRow], a: float = 0.2, b: float = 0.3) -> RankedList:
    """``b * H + (1 - b) * (a * R + (1 - a) * S)``; defaults weigh R 0.14, S 0.56, H 0.30."""
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        raise InvalidFusionSpec(f"fixed_weight parameters a={a}, b={b} must lie in [0, 1]")
    matrix = feature_matrix(rows)
    r, h, s = matrix[:, 0], matrix[:, 1], matrix[:, 2]
    return _ranked(rows, b * h + (1.0 - b) * (a * r + (1.0 - a) * s))


def fuse_comb(rows: Sequence[FeatureRow], variant: str = "sum") -> RankedList:
    """
    CombSUM, CombMNZ or CombANZ.

    SUM adds the three scores, MNZ multiplies the sum by the number of
    non-zero components, ANZ divides it by that number (0 when all are zero).
    """
    matrix = feature_matrix(rows)
    total = matrix.sum(axis=1)
    nonzero = (matrix > 0).sum(axis=1)
    if variant == "sum":
        scores = total
    elif variant == "mnz":
        scores = total * nonzero
    elif variant == "anz":
        scores = np.divide(total, nonzero, out=np.zeros_like(total), where=nonzero > 0)
    else:
        raise InvalidFusionSpec(f"Unknown Comb variant {variant!r}")
    return _ranked(rows, scores)


def _component_order(rows: Sequence[FeatureRow], column: int) -> List[int]:
    return sorted(range(len(rows)), key=lambda i: (-rows[i].features[column], rows[i].file_path))


def fuse_borda(rows: Sequence[FeatureRow]) -> RankedList:
    """Each component awards ``m - rank`` points; the best total ranks first."""
    m = len(rows)
    points = np.zeros(m)
    for column in range(len(COMPONENTS)):
        for position, i in enumerate(_component_order(rows, column), 1):
            points[i] += m - position
    return _ranked(rows, points)


def corrb_weights(rows: Sequence[FeatureRow], top_n: int = 10) -> np.ndarray:
    """
    Component weights from top-N agreement.

    ``w_i = (1 + mean over j != i of |top_i & top_j| / N) / 2``, so a component
    agreeing with both others weighs 1 and one agreeing with neither 0.5.

    A top list only holds files the component scored above 0, so a component
    with fewer than N such files cannot agree on its zero-score padding.
    """
    n = min(top_n, len(rows))
    if n == 0:
        return np.ones(len(COMPONENTS))
    tops = [
        {
            rows[i].file_path
            for i in _component_order(rows, column)[:n]
            if rows[i].features[column] > 0
        }
        for column in range(len(COMPONENTS))
    ]
    weights = []
    for i, top in enumerate(tops):
        overlap = sum(len(top & other) / n for j, other in enumerate(tops) if j != i)
        weights.append(0.5 * (1.0 + overlap / (len(tops) - 1)))
    return np.array(weights)


def fuse_corrb(rows: Sequence[FeatureRow], top_n: int = 10) -> RankedList:
    """Weighted sum of the normalized scores with :func:`corrb_weights`."""
    if not rows:
        return RankedList("")
    return _ranked(rows, feature_matrix(rows) @ corrb_weights(rows, top_n))


def split_train_test(
    bugs: Sequence[IssueReport], ratio: float = 0.8
) -> Tuple[List[str], List[str]]:
    """
    Chronological split: the first ``ceil(ratio * n)`` resolved bugs train.

    Raises
    ------
    TooFewBugs
        With fewer than five resolved bugs.
    """
    resolved = sorted(
        (bug for bug in bugs if bug.resolved_date is not None),
        key=lambda bug: (bug.resolved_date, bug.id),
    )
    if len(resolved) < 5:
        raise TooFewBugs(f"Need at least 5 resolved bugs with ground truth, got {len(resolved)}")
    n_train = math.ceil(round(ratio * len(resolved), 9))
    ids = [bug.id for bug in resolved]
    return ids[:n_train], ids[n_train:]


def undersample(rows: Sequence[FeatureRow], seed: int) -> List[FeatureRow]:
    """
    Keep every positive row and as many randomly chosen negatives.

    Original row order is preserved.

    Raises
    ------
    SingleClass
        If the rows lack positives or negatives.
    """
    positives = [i for i, row in enumerate(rows) if row.label]
    negatives = [i for i, row in enumerate(rows) if not row.label]
    if not positives or not negatives:
        raise SingleClass("Under-sampling needs both buggy and clean rows")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(negatives), size=min(len(positives), len(negatives)), replace=False)
    keep = set(positives) | {negatives[int(i)] for i in chosen}
    return [row for i, row in enumerate(rows) if i in keep]


ESTIMATOR_DEFAULTS: Dict[ComposerKind, Tuple[type, Dict[str, Any]]] = {
    ComposerKind.LR: (
        SGDClassifier,
        {
            "loss": "log_loss",
            "penalty": None,
            "learning_rate": "constant",
            "eta0": 0.1,
            "max_iter": 1000,
            "tol": None,
        },
    ),
    ComposerKind.DT: (
        DecisionTreeClassifier,
        {"criterion": "gini", "max_depth": 10, "min_samples_leaf": 5},
    ),
    ComposerKind.RF: (
        RandomForestClassifier,
        {"n_estimators": 100, "criterion": "gini", "max_features": 2, "bootstrap": True, "n_jobs": 1},
    ),
    ComposerKind.MLP: (
        MLPClassifier,
        {"hidden_layer_sizes": (16,), "activation": "relu", "max_iter": 200},
    ),
}


@dataclass
class Model:
    """A fitted supervised composer. Read-only after training."""

    kind: ComposerKind
    estimator: Any
    seed: int

    def positive_probability(self, matrix: np.ndarray) -> np.ndarray:
        classes = list(self.estimator.classes_)
        if 1 not in classes:
            return np.zeros(len(matrix))
        return self.estimator.predict_proba(matrix)[:, classes.index(1)]

    @property
    def feature_importances(self) -> Optional[Dict[str, float]]:
        """Normalized impurity decrease per component for tree-based models."""
        values = getattr(self.estimator, "feature_importances_", None)
        if values is None:
            return None
        return {name: float(v) for name, v in zip(COMPONENTS, values)}

    @property
    def coefficients(self) -> Optional[Dict[str, float]]:
        if self.kind is not ComposerKind.LR:
            return None
        weights = {name: float(w) for name, w in zip(COMPONENTS, self.estimator.coef_[0])}
        weights["intercept"] = float(self.estimator.intercept_[0])
        return weights


def train_model(
    kind: ComposerKind,
    rows: Sequence[FeatureRow],
    hyper: Optional[Mapping[str, Any]] = None,
    seed: int = 0,
) -> Model:
    """
    Fit a supervised composer on (usually under-sampled) feature rows.

    Parameters
    ----------
    kind : ComposerKind
        One of lr, dt, rf, mlp.
    rows : sequence of FeatureRow
        Training rows; must contain both labels.
    hyper : mapping, optional
        Estimator keyword arguments overriding the defaults.
    seed : int
        Random state of the estimator.

    Raises
    ------
    NonFiniteFeatures
        If any feature is NaN or infinite.
    SingleClass
        If only one label is present.
    """
    if kind not in ESTIMATOR_DEFAULTS:
        raise InvalidFusionSpec(f"{kind.value} is not a supervised composer")
    matrix = feature_matrix(rows)
    if not np.isfinite(matrix).all():
        raise NonFiniteFeatures("Training features contain NaN or infinite values")
    labels = np.array([int(row.label) for row in rows])
    if len(set(labels.tolist())) < 2:
        raise SingleClass("Training rows must contain both buggy and clean files")

    estimator_class, defaults = ESTIMATOR_DEFAULTS[kind]
    params = {**defaults, **dict(hyper or {}), "random_state": seed}
    estimator = estimator_class(**params)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=ConvergenceWarning)
        estimator.fit(matrix, labels)
    return Model(kind=kind, estimator=estimator, seed=seed)


def predict_rank(model: Model, rows: Sequence[FeatureRow]) -> RankedList:
    """Rank files by predicted probability of being changed by the fix."""
    if not rows:
        return RankedList("")
    return _ranked(rows, model.positive_probability(feature_matrix(rows)))


def compose(spec: FusionSpec, rows: Sequence[FeatureRow], model: Optional[Model] = None) -> RankedList:
    """
    Run one composer on a query's feature rows.

    Supervised composers need the ``model`` trained for ``spec``.
    """
    if spec.normalization is Normalization.MINMAX_PER_QUERY and spec.kind is not ComposerKind.BORDA:
        rows = normalize_per_query(rows)
    kind = spec.kind
    if kind is ComposerKind.FIXED_WEIGHT:
        return fuse_fixed(rows, float(spec.params.get("a", 0.2)), float(spec.params.get("b", 0.3)))
    if kind in (ComposerKind.COMBSUM, ComposerKind.COMBMNZ, ComposerKind.COMBANZ):
        return fuse_comb(rows, kind.value[len("comb"):])
    if kind is ComposerKind.CORRB:
        return fuse_corrb(rows, int(spec.params.get("top_n", 10)))
    if kind is ComposerKind.BORDA:
        return fuse_borda(rows)
    if model is None:
        raise InvalidFusionSpec(f"composer {kind.value} needs a trained model")
    return predict_rank(model, rows)


def prepare_training_rows(
    rows: Sequence[FeatureRow], spec: FusionSpec
) -> List[FeatureRow]:
    """Normalize per query as ``spec`` requires, then under-sample with its seed."""
    if spec.normalization is Normalization.MINMAX_PER_QUERY:
        by_bug: Dict[str, List[FeatureRow]] = {}
        for row in rows:
            by_bug.setdefault(row.bug_id, []).append(row)
        rows = [r for bug_id in sorted(by_bug) for r in normalize_per_query(by_bug[bug_id])]
    return undersample(rows, int(spec.params["seed"]))
