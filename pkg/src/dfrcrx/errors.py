"""Exception types shared across the toolkit."""


class DimensionError(ValueError):
    """Filter/system dimensions violate a solvability bound.

    The message names the violated inequality so callers (and the CLI)
    can echo which bound failed.
    """


class ConditioningError(RuntimeError):
    """A linear system is too ill-conditioned to solve reliably.

    Carries the offending condition estimate (and, for circulant blocks,
    the waveform index and spectral bin) in the message.
    """


class InfeasibleError(ValueError):
    """The constraint set admits no nontrivial solution."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""
