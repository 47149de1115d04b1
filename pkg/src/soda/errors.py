"""Exception types shared across the toolkit."""


class SodaError(Exception):
    """Base class for all toolkit errors."""


class MalformedRecord(SodaError):
    """A line in an input file does not parse or violates the record schema."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonMonotoneFrames(SodaError):
    """Duplicate frame indices; a sequence cannot be put in strict order."""


class EmptySequence(SodaError):
    """A sequence with no frames where at least one is required."""


class OutOfGrid(SodaError):
    """A detection coordinate lies outside the declared grid."""


class VersionMismatch(SodaError):
    """File header declares an unsupported format version."""


class IoFailure(SodaError):
    """Underlying I/O failed (wraps the OS error)."""


class InvalidAssignment(SodaError):
    """A configuration references a candidate index that does not exist."""


class StateSpaceTooLarge(SodaError):
    """Exact enumeration was requested for an intractably large state space."""


class InsufficientSamples(SodaError):
    """Fewer samples than clusters requested."""


class DegenerateData(SodaError):
    """Data has too little diversity for the requested operation."""


class DimensionMismatch(SodaError):
    """Feature dimensionality disagrees with the codebook."""


class LengthMismatch(SodaError):
    """Aligned inputs have different lengths."""


class SymbolOutOfRange(SodaError):
    """A symbol value is not smaller than its declared alphabet size."""


class EmptyHistogram(SodaError):
    """A histogram with zero total count cannot be normalized."""


class InvalidPmf(SodaError):
    """An explicit probability mass function is negative or does not sum to 1."""


class WindowTooLarge(SodaError):
    """Sliding window does not fit in the sequences."""


class EmptyInput(SodaError):
    """An operation that needs at least one element received none."""


class ClassTooSmall(SodaError):
    """A label class has too few members for a stratified split."""


class NoTrainData(SodaError):
    """Classification was requested without any training sequences."""


class InvalidSpec(SodaError):
    """A generator specification violates its own constraints."""


class IncompatibleAlphabets(SodaError):
    """Two symbol sequences disagree on alphabet size or realization count."""


class ConfigError(SodaError):
    """A configuration key is unknown or out of range."""


class ShrinkageDegenerateWarning(UserWarning):
    """Shrinkage target equals the empirical estimate; coefficient pinned to 1."""
