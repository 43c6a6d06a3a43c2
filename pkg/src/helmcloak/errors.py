"""Exception hierarchy shared by all helmcloak modules.

The CLI maps these onto exit codes: ParameterError -> 2, numerical errors
(ResonanceError, SolverError, AssemblyError, ConsistencyError) -> 3,
ResolutionError -> 4.
"""


class HelmcloakError(Exception):
    """Base class for all package errors."""


class ParameterError(HelmcloakError, ValueError):
    """Invalid or out-of-range user-supplied parameter."""


class RangeError(ParameterError):
    """Argument outside the supported evaluation range."""


class DomainError(HelmcloakError):
    """Point evaluated outside the domain of a map or field."""


class GeometryError(HelmcloakError):
    """Degenerate geometric configuration (e.g. boundary node at origin)."""


class AssemblyError(HelmcloakError):
    """Coefficient evaluation or assembly failure; carries a triangle id."""


class ResonanceError(HelmcloakError):
    """Solve attempted at (or too close to) an interior resonance."""


class SolverError(HelmcloakError):
    """Eigen/linear solver failure not attributable to a resonance."""


class ConsistencyError(HelmcloakError):
    """Input vector does not satisfy the equations it is claimed to solve."""


class ResolutionError(HelmcloakError):
    """Mesh or basis resolution insufficient for the requested computation."""
