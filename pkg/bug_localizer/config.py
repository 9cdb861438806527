"""Run configuration: defaults, config files and command-line overrides."""

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml

from bug_localizer.bugcache import BugCacheConfig, HistoryCutoff
from bug_localizer.composer import ComposerKind, FusionSpec, Normalization
from bug_localizer.corpus import DEFAULT_EXTENSIONS, SourceFilter, TruthPolicy
from bug_localizer.errors import ConfigError
from bug_localizer.tracescore import CutoffMode, TraceScoreConfig

DEFAULT_COMPOSERS = ("fixed_weight",)
SNAPSHOT_GRANULARITIES = ("per_window", "per_bug")


@dataclass(frozen=True)
class RunConfig:
    """
    Every setting of a run.

    A run is reproducible from this object plus the hashes of its inputs,
    both of which go into the run manifest.
    """

    issues: Optional[str] = None
    issues_format: Optional[str] = None
    commits: Optional[str] = None
    links: Optional[str] = None
    sources: Optional[str] = None
    workdir: str = "bug-localizer-run"
    project: str = "PROJECT"
    extensions: Tuple[str, ...] = DEFAULT_EXTENSIONS
    cutoff_mode: str = CutoffMode.RELAXED.value
    window_days: int = 365
    max_bug_files: int = 10
    max_feature_files: int = 20
    bugcache_k: float = 15.0
    bugcache_cutoff: str = HistoryCutoff.CREATED.value
    allow_leakage: bool = False
    fix_regex: str = "(.*fix.*)|(.*bug.*)"
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    snapshot_granularity: str = "per_window"
    composers: Tuple[str, ...] = DEFAULT_COMPOSERS
    fixed_a: float = 0.2
    fixed_b: float = 0.3
    corrb_top_n: int = 10
    normalization: str = Normalization.MINMAX_PER_QUERY.value
    split_ratio: float = 0.8
    seed: int = 0
    truth_policy: str = TruthPolicy.ALL_CHANGED.value
    workers: int = 4

    def __post_init__(self) -> None:
        self._check_choice("cutoff_mode", [m.value for m in CutoffMode])
        self._check_choice("bugcache_cutoff", [c.value for c in HistoryCutoff])
        self._check_choice("snapshot_granularity", SNAPSHOT_GRANULARITIES)
        self._check_choice("normalization", [n.value for n in Normalization])
        self._check_choice("truth_policy", [p.value for p in TruthPolicy])
        known = {k.value for k in ComposerKind}
        for composer in self.composers:
            if composer not in known:
                raise ConfigError(
                    f"Unknown composer {composer!r}; choose from {', '.join(sorted(known))}"
                )
        if not self.composers:
            raise ConfigError("At least one composer is required")
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError(f"split_ratio must lie in (0, 1), got {self.split_ratio}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.window_days <= 0 or self.max_bug_files < 1 or self.max_feature_files < 1:
            raise ConfigError("window_days, max_bug_files and max_feature_files must be positive")
        # k, a, b and the leakage guard are checked by the component configs
        self.bugcache_config()
        self.fusion_specs()

    def _check_choice(self, name: str, choices) -> None:
        value = getattr(self, name)
        if value not in choices:
            raise ConfigError(f"{name} must be one of {', '.join(choices)}; got {value!r}")

    def source_filter(self) -> SourceFilter:
        return SourceFilter(tuple(self.extensions))

    def trace_config(self) -> TraceScoreConfig:
        return TraceScoreConfig(self.window_days, self.max_bug_files, self.max_feature_files)

    def bugcache_config(self) -> BugCacheConfig:
        return BugCacheConfig(
            k=self.bugcache_k,
            cutoff=HistoryCutoff(self.bugcache_cutoff),
            fix_regex=self.fix_regex,
            allow_leakage=self.allow_leakage,
        )

    def fusion_specs(self) -> List[FusionSpec]:
        specs = []
        for composer in self.composers:
            kind = ComposerKind(composer)
            params: Dict[str, Any] = {"seed": self.seed}
            if kind is ComposerKind.FIXED_WEIGHT:
                params.update(a=self.fixed_a, b=self.fixed_b)
            elif kind is ComposerKind.CORRB:
                params["top_n"] = self.corrb_top_n
            specs.append(FusionSpec(kind, params, Normalization(self.normalization)))
        return specs

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["extensions"] = list(self.extensions)
        data["composers"] = list(self.composers)
        return data


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
LIST_FIELDS = {"extensions", "composers"}


def _split_list(value: Any) -> Tuple[str, ...]:
    if isinstance(value, (list, tuple)):
        items = [str(item).strip() for item in value]
    else:
        items = [item.strip() for item in str(value).split(",")]
    return tuple(item for item in items if item)


def _coerce(name: str, value: Any) -> Any:
    if name not in FIELD_TYPES:
        raise ConfigError(f"Unknown configuration key: {name}")
    if name in LIST_FIELDS:
        return _split_list(value) if value is not None else ()
    default = getattr(RunConfig, name, None)
    if value is None:
        return None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number, got {value!r}")
        return float(value)
    return str(value)


def parse_config_text(text: str) -> Dict[str, Any]:
    """
    Parse flat ``key=value`` lines.

    Right-hand sides are typed with YAML scalar rules, so ``true``, ``7`` and
    ``0.2`` become bool, int and float. ``#`` starts a comment line.
    """
    values: Dict[str, Any] = {}
    for line_num, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_num}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        try:
            values[key] = yaml.safe_load(value.strip()) if value.strip() else None
        except yaml.YAMLError:
            values[key] = value.strip()
    return values


def load_config_file(path: "str | Path") -> Dict[str, Any]:
    """Read a flat key=value file, or a flat mapping from ``.yaml``/``.yml``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from None
    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML in {path}: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must hold a flat mapping")
        return data
    return parse_config_text(text)


def build_config(
    path: "str | Path | None" = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Layer defaults, a config file and overrides (highest precedence).

    Override values of None are ignored so unset CLI flags keep file values.
    """
    values: Dict[str, Any] = {}
    if path is not None:
        values.update(load_config_file(path))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    coerced = {name: _coerce(name, value) for name, value in values.items()}
    try:
        return replace(RunConfig(), **coerced) if coerced else RunConfig()
    except TypeError as e:
        raise ConfigError(str(e)) from None
