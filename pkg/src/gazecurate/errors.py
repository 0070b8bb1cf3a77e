"""Exception hierarchy shared across the toolkit.

Two broad families matter for the CLI: ConfigError maps to exit code 2,
DataError (and subclasses) to exit code 3.
"""

from __future__ import annotations


class GazecurateError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(GazecurateError):
    """Bad run configuration (missing keys, unparsable values, bad grid)."""


class DataError(GazecurateError):
    """Input data violates a format or content contract."""


class MissingColumn(DataError):
    """A required column is absent from a tabular input."""


class OutOfRangeField(DataError):
    """A field value falls outside its declared range."""

    def __init__(self, field: str, row: int, value: object) -> None:
        super().__init__(f"{field} out of range on row {row}: {value!r}")
        self.field = field
        self.row = row
        self.value = value


class NonMonotoneTimestamps(DataError):
    """Too many timestamp regressions to trust the stream ordering."""


class EmptyStream(DataError):
    """No usable samples were found in an eye stream."""


class UnknownLabel(DataError):
    """A label string is not present in the declared label dictionary."""


class DuplicateFrameId(DataError):
    """The same frame_id appears more than once."""


class BadMagic(DataError):
    """Embedding file does not start with the expected magic bytes."""


class TruncatedPayload(DataError):
    """Embedding payload is shorter than the header declares."""


class DimMismatch(DataError):
    """A frame references an embedding row outside the stored matrix."""


class ChecksumMismatch(DataError):
    """Embedding payload checksum does not match the header."""


class TooFewSamples(GazecurateError):
    """A window holds too few samples for the requested computation."""


class SingleClass(DataError):
    """Training data contains fewer than two classes."""


class NonFiniteFeature(DataError):
    """Feature matrix contains NaN or infinite entries."""


class EmptySelection(DataError):
    """A selection manifest yields no usable training frames."""
