"""Exception hierarchy shared by every hnote module."""

from __future__ import annotations


class HNoteError(Exception):
    """Base class for all errors raised by this package."""


class TokenizeError(HNoteError, ValueError):
    """One or more lexemes are not two-hex-digit tokens.

    ``errors`` holds the collected :class:`~hnote.core.ValidationError`
    entries (category ``InvalidToken``) so callers can turn a failed
    tokenize into a validation report instead of crashing.
    """

    def __init__(self, errors):
        self.errors = tuple(errors)
        first = self.errors[0].message if self.errors else "invalid token"
        more = f" (+{len(self.errors) - 1} more)" if len(self.errors) > 1 else ""
        super().__init__(first + more)


class InvalidScore(HNoteError, ValueError):
    """Raised when an operation requires a validating score and gets something else."""

    def __init__(self, report, message: str | None = None):
        self.report = report
        if message is None:
            if report is not None and report.errors:
                message = f"score is invalid: {report.errors[0].message}"
                if len(report.errors) > 1:
                    message += f" (+{len(report.errors) - 1} more)"
            else:
                message = "score is invalid"
        super().__init__(message)


class DurationOverflow(HNoteError, ValueError):
    """A line's unit total is not a positive multiple of the 32-unit measure."""


class MalformedToken(HNoteError, ValueError):
    """A YNote token has the wrong length or character set."""


class UnknownDurationCode(HNoteError, KeyError):
    """A YNote duration code is absent from the active duration table."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown duration code"


class UnrepresentableDuration(HNoteError, ValueError):
    """A note length cannot be decomposed into duration-table values."""


class EmptySequence(HNoteError, ValueError):
    """A metric received an empty token sequence."""


class ReferenceTooShort(HNoteError, ValueError):
    """The reference is shorter than the requested n-gram order."""


class MissingReference(HNoteError, KeyError):
    """Generated pieces whose id has no reference piece."""

    def __init__(self, ids):
        self.ids = tuple(ids)
        super().__init__(f"no reference for: {', '.join(self.ids)}")

    def __str__(self) -> str:
        return self.args[0]


class EmptyCorpus(HNoteError, ValueError):
    """An n-gram model cannot be trained on zero pieces."""


class BadConfig(HNoteError, ValueError):
    """Invalid export or pipeline configuration."""
