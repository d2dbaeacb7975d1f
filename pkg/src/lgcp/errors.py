"""Exception hierarchy shared across the package."""


class LgcpError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(LgcpError):
    """Degenerate or self-intersecting geometry."""


class OutOfExtentError(LgcpError):
    """A query point fell outside a raster extent."""

    def __init__(self, message, indices=None):
        super().__init__(message)
        self.indices = list(indices) if indices is not None else []


class MeshRefinementError(LgcpError):
    """Refinement failed to terminate within its iteration budget."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PointNotCoveredError(LgcpError):
    """A point is outside the mesh cover."""

    def __init__(self, message, indices=None):
        super().__init__(message)
        self.indices = list(indices) if indices is not None else []


class AssemblyError(LgcpError):
    """Finite-element or precision-matrix assembly failed."""


class CoverageError(LgcpError):
    """A sampler or prediction grid escapes the mesh cover."""


class ConvergenceError(LgcpError):
    """An iterative solver did not converge."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


class ConstraintError(LgcpError):
    """Rank-deficient or inconsistent linear constraints."""


class ConfigError(LgcpError):
    """Invalid run configuration."""


class DataError(LgcpError):
    """Malformed input data."""
