"""Exception hierarchy shared across the package.

Every error raised by library code derives from DocretError so callers
(and the CLI exit-code mapping) can distinguish data problems from bugs.
"""


class DocretError(Exception):
    """Base class for all errors raised by this package."""


class ZeroVector(DocretError):
    """An all-zero vector where a direction is required."""


class DimError(DocretError):
    """A truncation dimension outside the valid range."""


class DimMismatch(DocretError):
    """Operands with incompatible dimensionality."""


class DuplicateId(DocretError):
    """The same identifier appears more than once."""


class EmptyText(DocretError):
    """Text input is empty after trimming."""


class RemoteUnavailable(DocretError):
    """The remote embedding service failed or returned non-200."""


class ParseError(DocretError):
    """A file failed to parse; message carries file and line context."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc = f" ({loc})"
        super().__init__(f"{message}{loc}")


class DanglingReference(DocretError):
    """Qrels reference ids missing from the corpus or query set."""


class AnnUnavailable(DocretError):
    """Approximate search requested but no graph was built."""


class DegenerateBatch(DocretError):
    """A loss batch with no items."""


class MissingNegatives(DocretError):
    """Hard negatives required but none supplied."""


class EmptyQuery(DocretError):
    """A query with no usable terms."""


class PoolTooSmall(DocretError):
    """Candidate pool smaller than the number of negatives requested."""


class NoNeighbors(DocretError):
    """A page with no neighboring pages in its source document."""


class QueryMismatch(DocretError):
    """Two runs/reports cover different query sets."""


class SchemaMismatch(DocretError):
    """Checkpoints with differing tensor names or shapes."""


class ZeroTensor(DocretError):
    """A tensor with zero norm where a direction is required."""


class BadMagic(DocretError):
    """Checkpoint container does not start with the expected magic bytes."""


class CorruptHeader(DocretError):
    """Checkpoint header is unreadable or internally inconsistent."""


class TruncatedData(DocretError):
    """Checkpoint data region shorter than the header declares."""


class DegenerateData(DocretError):
    """All input points identical; projection undefined."""


class GridMismatch(DocretError):
    """Heatmap grid shape does not cover the document tokens."""


class OracleLimitExceeded(DocretError):
    """Instance too large for a brute-force oracle."""
