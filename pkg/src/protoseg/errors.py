"""Exception and warning types shared across the package."""


class ProtosegError(Exception):
    """Base class for all package errors."""


class ConfigError(ProtosegError):
    """A configuration value is out of range, unknown, or inconsistent."""


class ShapeError(ProtosegError):
    """Tensor or image dimensions violate an operation's contract."""


class EmptyMaskError(ProtosegError):
    """An operation requiring at least one set pixel received an empty mask."""


class ParseError(ProtosegError):
    """A serialized file could not be parsed.

    Carries enough context (file, field, frame) to locate the offending
    entry without re-reading the file.
    """

    def __init__(self, message, *, path=None, field=None):
        self.path = path
        self.field = field
        where = []
        if path is not None:
            where.append(str(path))
        if field is not None:
            where.append(f"field {field!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class EmptyCorpusError(ProtosegError):
    """Anchor fitness was asked to score an empty box corpus."""


class UndefinedMetricError(ProtosegError):
    """A pairwise metric was evaluated on two empty masks."""


class TrainingDivergedError(ProtosegError):
    """Training hit a non-finite loss; carries diagnostics for the abort."""

    def __init__(self, iteration, term, max_abs_grad):
        self.iteration = iteration
        self.term = term
        self.max_abs_grad = max_abs_grad
        super().__init__(
            f"non-finite loss at iteration {iteration} (term {term!r}, "
            f"max |grad| {max_abs_grad:.3e})"
        )


class ValidationWarning(UserWarning):
    """Imported annotations are usable but violate a declared invariant."""
