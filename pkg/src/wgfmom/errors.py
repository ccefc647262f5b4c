"""Exception types shared across the solver."""


class WgfError(Exception):
    """Base class for all solver errors."""


class MeshError(WgfError):
    """Invalid mesh topology or geometry (non-manifold edge, zero area, ...)."""


class MeshFormatError(WgfError):
    """Unreadable or unsupported mesh file content."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ParameterError(WgfError):
    """Invalid physical or numerical parameter."""


class SingularityError(WgfError):
    """Kernel evaluated at (or too close to) a singular point."""


class AssemblyError(WgfError):
    """Matrix assembly produced an invalid entry."""


class PreconditionerError(WgfError):
    """Preconditioner cannot be built (zero diagonal entry)."""


class ConvergenceError(WgfError):
    """Iterative solve did not reach the requested tolerance."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class SizeError(WgfError):
    """Problem dimension exceeds a configured cap."""


class TruncationError(WgfError):
    """Series truncation order too low for the requested accuracy."""


class EvaluationError(WgfError):
    """Field evaluation requested at an inadmissible point."""


class ConfigError(WgfError):
    """Scenario configuration is invalid; carries the offending key path."""

    def __init__(self, message, key=None):
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)
        self.key = key
