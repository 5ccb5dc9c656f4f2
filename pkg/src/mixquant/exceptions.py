"""Exception hierarchy.

The CLI maps these onto exit codes: validation-type errors exit 2, solver
failures exit 3, I/O and fetch failures exit 4.
"""


class MixquantError(Exception):
    """Base class for all package errors."""


class ConfigurationError(MixquantError, ValueError):
    """Malformed spec, config, or incompatible shapes."""


class DomainError(MixquantError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class DataError(MixquantError, ValueError):
    """Invalid or non-ingestible input data."""


class ValidationError(MixquantError, ValueError):
    """A computed object violates a contract it is required to satisfy."""


class SolverError(MixquantError, RuntimeError):
    """An optimization routine failed or did not converge."""


class FetchError(MixquantError, IOError):
    """Remote data retrieval failed.

    ``retriable`` distinguishes transient transport failures from malformed
    payloads.
    """

    def __init__(self, message, retriable=False):
        super().__init__(message)
        self.retriable = retriable
