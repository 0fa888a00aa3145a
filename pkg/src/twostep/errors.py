"""Exception hierarchy shared by the library and the CLI."""


class TwoStepError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ConfigError(TwoStepError, ValueError):
    """Invalid parameters, configuration documents or field shapes."""

    exit_code = 2


class CodecError(TwoStepError, OSError):
    """Unreadable, missing or malformed image files."""

    exit_code = 3


class DegenerateInputError(TwoStepError, ValueError):
    """The input cannot determine a step (e.g. identical frames, constant images)."""

    exit_code = 4


class EstimatorFailure(TwoStepError, RuntimeError):
    """An estimator ran but did not produce a usable step (divergence, empty fit)."""

    exit_code = 5


class IncompatibleError(ConfigError):
    """Estimator requires analytic maps that the chosen normalizer does not provide."""
