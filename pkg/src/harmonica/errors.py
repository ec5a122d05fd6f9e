"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, BackendError -> 3,
ModelOutputError -> 4.
"""


class HarmonicaError(Exception):
    """Base class for package errors."""


class ConfigError(HarmonicaError):
    """Bad user input: flags, config files, vectors, file formats."""


class BackendError(HarmonicaError):
    """An external model backend failed (crash, bad reply, timeout).

    Carries whatever diagnostics the backend produced in ``diagnostics``.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class ModelOutputError(HarmonicaError):
    """A model returned a malformed or non-finite output vector."""


class EmptyBallError(HarmonicaError):
    """A ball specification produced no usable points."""


class EvaluationError(HarmonicaError):
    """A model evaluation inside a gamma computation failed.

    ``point`` is the input that triggered the failure when it could be
    identified, ``None`` when the whole batch failed at once.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point
