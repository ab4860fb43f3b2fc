"""Exceptions shared across rarelab modules."""


class ConfigError(ValueError):
    """Invalid configuration or violated precondition (CLI exit code 1)."""


class NumericalAbort(RuntimeError):
    """A run stopped itself: CFL violation or tail mass at the truncation
    boundary (CLI exit code 2)."""

    def __init__(self, reason: str, t: float, detail: str = ""):
        self.reason = reason
        self.t = t
        msg = f"numerical abort ({reason}) at t = {t:.6g}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
