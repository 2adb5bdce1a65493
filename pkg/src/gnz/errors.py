"""Exception hierarchy.

Everything the toolkit raises deliberately derives from :class:`GnzError`,
so callers (and the CLI) can map failures to a single runtime-error exit
code without catching bare ``Exception``.
"""


class GnzError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(GnzError):
    """Invalid parameter or violated precondition."""


class FormatError(GnzError):
    """A file could not be encoded or decoded."""


class BadMagicError(FormatError):
    """Leading magic bytes do not identify a known format."""


class VersionError(FormatError):
    """Recognized format but unsupported version."""


class TruncatedError(FormatError):
    """Payload shorter than the header declares."""


class NonFiniteError(FormatError):
    """A value is NaN/Inf (or overflows 32-bit storage)."""


class AsymmetryError(FormatError):
    """A graph entry (i, j, w) lacks its mirrored (j, i, w)."""


class NegativeWeightError(FormatError):
    """A graph entry carries a negative weight."""


class IndexRangeError(FormatError):
    """A node index lies outside [0, n)."""


class LabelsError(FormatError):
    """Label CSV parse failure; message names the offending line."""


class GraphError(GnzError):
    """Structurally invalid graph."""


class IsolatedNodeError(GraphError):
    """A node has zero degree; diffusion is undefined there."""

    def __init__(self, node: int):
        super().__init__(f"node {node} is isolated (degree 0)")
        self.node = node


class SolverError(GnzError):
    """A numerical solver failed to produce a valid result."""


class NonConvergenceError(SolverError):
    """Iteration budget exhausted; carries the last iterate and residual."""

    def __init__(self, message, last_iterate=None, residual=None, iterations=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
        self.iterations = iterations


class ExtractorError(GnzError):
    """The feature extractor (mock or external process) failed."""

    def __init__(self, message, exit_code=None, diagnostics=""):
        super().__init__(message)
        self.exit_code = exit_code
        self.diagnostics = diagnostics


class PipelineError(GnzError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause
