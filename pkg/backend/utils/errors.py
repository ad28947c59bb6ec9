"""
Error hierarchy for the Ising spinor toolkit.

Input errors map to CLI exit code 2 and HTTP 400; identity failures map to
exit code 1. Every error may carry a ``locus`` dict naming where it happened.
"""

from typing import Any, Dict, Optional


class ToolkitError(Exception):
    """Base class for all toolkit errors"""

    exit_code: int = 2

    def __init__(self, message: str, locus: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.locus = locus or {}

    def to_dict(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "message": self.message, "locus": self.locus}


class ToolkitInputError(ToolkitError):
    """The request itself is invalid"""

    exit_code = 2


class IdentityFailure(ToolkitError):
    """A verified identity or numerical check did not hold"""

    exit_code = 1


# Domains and covers
class EmptyFaceSet(ToolkitInputError):
    pass


class DisconnectedFaces(ToolkitInputError):
    pass


class FlagArityMismatch(ToolkitInputError):
    pass


class WalkLeavesDomain(ToolkitInputError):
    pass


# Configurations and observables
class InfeasibleSources(ToolkitInputError):
    pass


class ComponentNotFound(ToolkitInputError):
    pass


class SourcesNotInBoundaryOfS(ToolkitInputError):
    pass


class MarkedPointsNotOuterBoundary(ToolkitInputError):
    pass


class NotAntisymmetric(ToolkitInputError):
    pass


# Solver
class SingularSystem(IdentityFailure):
    pass


class ZeroSolution(IdentityFailure):
    pass


class ClosureViolation(IdentityFailure):
    pass


# Continuum
class NotInUpperHalfPlane(ToolkitInputError):
    pass


class NearDegenerate(ToolkitInputError):
    pass


class NonRectilinear(ToolkitInputError):
    pass


class DegenerateDenominator(ToolkitInputError):
    pass


# Convergence harness
class PunctureOnBoundary(ToolkitInputError):
    pass


class MeshTooCoarse(ToolkitInputError):
    pass
