"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: :class:`ConfigError` -> 2,
:class:`NumericalError` and subclasses -> 3, :class:`MeshIOError` -> 4.
"""


class LcfRiskError(Exception):
    """Base class for all package errors."""


class DomainError(LcfRiskError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericalError(LcfRiskError, ArithmeticError):
    """A numerical procedure failed."""


class SolverError(NumericalError):
    """An iterative solver did not converge.

    Parameters
    ----------
    message : str
        Human-readable description.
    residual : float, optional
        Residual at the last iterate.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class AssemblyError(NumericalError):
    """The finite-element system could not be assembled or is singular."""


class MeshError(LcfRiskError, ValueError):
    """A mesh violates a structural invariant (e.g. an inverted element)."""


class MeshIOError(LcfRiskError, OSError):
    """A mesh file cannot be read or parsed."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc += ": "
        super().__init__(loc + message)
        self.path = path
        self.line = line


class StepSizeError(MeshError):
    """A finite-difference mesh perturbation inverted an element."""


class ConfigError(LcfRiskError, ValueError):
    """Configuration validation failed; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors) if self.errors else "invalid configuration")
