"""Exception types shared across the package."""


class NumericsError(RuntimeError):
    """An iterative numerical procedure failed to converge within its cap."""


class ConfigError(ValueError):
    """A run configuration violates a validation rule.

    ``code`` is the short rule label quoted in the diagnostic, e.g. ``"(hpregk)"``.
    """

    def __init__(self, code, message):
        self.code = code
        super().__init__(f"{code}: {message}")


class StepFailure(RuntimeError):
    """A time step did not converge; carries the step index and residual norm."""

    def __init__(self, step, time, residual, message=""):
        self.step = step
        self.time = time
        self.residual = residual
        detail = message or "Newton iteration cap exceeded"
        super().__init__(
            f"step {step} (t={time:.6g}) failed: {detail} (residual {residual:.3e})"
        )


class PositivityFailure(StepFailure):
    """The temperature Newton iterate could not be kept positive."""

    def __init__(self, step, time, residual):
        super().__init__(step, time, residual, message="positivity line search exhausted")
