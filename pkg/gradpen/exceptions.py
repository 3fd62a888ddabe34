"""Exception hierarchy shared by the services and the command line."""
from typing import Any, List, Optional


class GradpenError(Exception):
    """Base class for every error raised by gradpen"""


class MeshError(GradpenError, ValueError):
    """Invalid mesh parameters or mesh file"""


class DegenerateElementError(GradpenError):
    """A triangle with non-positive signed area was met during assembly"""

    def __init__(self, element: int, area: float):
        self.element = element
        self.area = area
        super().__init__(f"triangle {element} has non-positive area {area:.3e}")


class LinearSolverError(GradpenError):
    """Conjugate gradients could not produce a solution"""

    def __init__(self, message: str, iterations: int = 0, residual: float = float("nan")):
        self.iterations = iterations
        self.residual = residual
        super().__init__(message)


class BoundaryMismatchError(GradpenError, ValueError):
    """A field does not carry the prescribed boundary value"""


class PenaltyOverflowError(GradpenError, ArithmeticError):
    """The penalty term or the multiplier would overflow on some element"""

    def __init__(self, element: int, grad_norm: float, p: float):
        self.element = element
        self.grad_norm = grad_norm
        self.p = p
        super().__init__(
            f"penalty overflow on triangle {element}: |grad u|={grad_norm:.6g}, p={p:g}"
        )


class DescentDirectionError(GradpenError, ValueError):
    """The search direction is not a descent direction"""


class LineSearchError(GradpenError):
    """Backtracking exhausted without sufficient decrease"""


class ContinuationError(GradpenError):
    """A p-continuation stage failed; the completed stages are attached"""

    def __init__(self, p: float, reports: Optional[List[Any]] = None):
        self.p = p
        self.reports = list(reports or [])
        super().__init__(f"continuation stage p={p:g} failed after {len(self.reports)} stage(s)")


class OutsideDomainError(GradpenError, ValueError):
    """A point lies outside the unit disk"""


class ReportError(GradpenError, ValueError):
    """A report or configuration file is malformed"""
