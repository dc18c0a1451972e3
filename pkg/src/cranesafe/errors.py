"""Exception types raised across the package."""


class CraneSafeError(Exception):
    """Base class for package errors."""


class DegenerateMassMatrix(CraneSafeError, ValueError):
    """Inertia matrix is not numerically positive definite."""


class IntegrationError(CraneSafeError, FloatingPointError):
    """A flow produced a non-finite state."""


class UncertaintyBoundError(CraneSafeError, ValueError):
    """A disturbance realization exceeds its declared bound."""


class InfeasibleBoxError(CraneSafeError, ValueError):
    """Obstacles leave no free space for the safety box."""


class SolverError(CraneSafeError, RuntimeError):
    """The optimal control pipeline could not produce a solution."""


class ScenarioError(CraneSafeError, ValueError):
    """Scenario file is malformed or inconsistent."""
