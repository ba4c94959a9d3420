# core/exceptions.py


class PackingError(Exception):
    """Root of every error raised by the toolkit."""


class MeshFormatError(PackingError):
    """A mesh, radii or target document is malformed. The message names the location."""


class VertexIndexError(PackingError, IndexError):
    """A vertex index is outside 0..N-1."""


class InvalidRadiiError(PackingError):
    """Radii are not strictly positive finite numbers of the right shape."""


class AdmissibilityError(PackingError):
    """A tetrahedron is degenerate where a nondegenerate one is required."""

    def __init__(self, message: str, tetrahedron: int | None = None, label=None):
        super().__init__(message)
        self.tetrahedron = tetrahedron
        self.label = label


class NumericDomainError(PackingError):
    """A trigonometric argument left its domain by more than roundoff, or a value is not finite."""


class NoFiniteRootError(PackingError):
    """The tangent configuration has no finite critical sphere."""


class InvariantViolation(PackingError):
    """An internal consistency check failed. Seeing this means a bug, not bad input."""


class QuadratureError(PackingError):
    """Adaptive quadrature did not reach the requested accuracy."""


class UnsupportedOperationError(PackingError):
    """The operation is not defined for the requested background geometry."""
