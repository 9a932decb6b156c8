"""Exception types shared across the package."""


class ModelError(ValueError):
    """Invalid game, outcome or structure data.

    ``code`` is a stable diagnostic identifier (e.g. ``PRIOR_SUM``) and
    ``path`` points at the offending field when the data came from a document.
    """

    def __init__(self, code, message, path=""):
        self.code = code
        self.path = path
        where = f" at {path}" if path else ""
        super().__init__(f"{code}{where}: {message}")


class DomainError(ValueError):
    """Argument outside the domain of an operation (bad mass, eta <= 0, ...)."""


class ConsistencyError(ValueError):
    """Two inputs that must agree do not (states, supports, indexing)."""


class UnsupportedModelError(ValueError):
    """The operation requires a convex potential and the game has none."""


class ConvergenceError(RuntimeError):
    def __init__(self, message, best_gap, iterations):
        self.best_gap = best_gap
        self.iterations = iterations
        super().__init__(f"{message} (best gap {best_gap:.3e} after {iterations} iterations)")


class InfeasibleError(RuntimeError):
    """LP infeasible; ``certificate`` holds the phase-1 residual and duals."""

    def __init__(self, message, certificate):
        self.certificate = certificate
        super().__init__(message)


class UnboundedError(RuntimeError):
    pass


class ResourceLimitError(RuntimeError):
    pass
