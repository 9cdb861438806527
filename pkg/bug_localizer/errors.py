"""Exception hierarchy. The three families map onto CLI exit codes."""


class BugLocalizerError(Exception):
    """Base class for every error raised by bug_localizer."""

    exit_code = 2


class ConfigError(BugLocalizerError):
    """Invalid run configuration (exit code 1)."""

    exit_code = 1


class LeakageGuardError(ConfigError):
    """Resolved-date cut-off requested without explicitly allowing leakage."""


class InvalidFusionSpec(ConfigError):
    """Composer parameters out of range or missing."""


class DataError(BugLocalizerError):
    """Input data cannot be used (exit code 2)."""

    exit_code = 2


class MissingField(DataError):
    pass


class MalformedTimestamp(DataError):
    pass


class DuplicateId(DataError):
    pass


class InvalidRecord(DataError):
    """A record violates a structural invariant (bad enum, bad change shape)."""


class UnreadableSource(DataError):
    pass


class EmptyHistory(DataError):
    pass


class NoLinkedCommits(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class EmptyIndex(DataError):
    pass


class EmptySnapshot(DataError):
    pass


class TooFewBugs(DataError):
    pass


class SingleClass(DataError):
    pass


class NonFiniteFeatures(DataError):
    pass


class EmptyTruth(DataError):
    pass


class ZeroVariance(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptySample(DataError):
    pass


class InsufficientOverlap(DataError):
    pass


class UnknownLanguage(DataError):
    pass


class InvalidQuery(DataError):
    pass


class InvariantViolation(BugLocalizerError):
    """An internal invariant tripped (exit code 3)."""

    exit_code = 3


class LeakageError(InvariantViolation):
    """A commit dated at or after the query creation reached Susp^H."""
