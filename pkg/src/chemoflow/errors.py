"""Exception types shared across the solver stack."""


class InputDomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """Configuration document is invalid; message carries the key path."""


class CflViolationError(RuntimeError):
    """Explicit step called with dt above the advective stability bound."""


class NumericalFailureError(RuntimeError):
    """An iterative solve did not reach its tolerance within the iteration cap."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])

    @property
    def last_residual(self):
        return self.residual_history[-1] if self.residual_history else float("nan")


class SetupError(RuntimeError):
    """A test/experiment cannot run as posed (e.g. support hits the boundary)."""


class RunAbortedError(RuntimeError):
    """A time loop aborted mid-run; carries the partial result and checkpoint."""

    def __init__(self, message, result=None, checkpoint_path=None):
        super().__init__(message)
        self.result = result
        self.checkpoint_path = checkpoint_path
