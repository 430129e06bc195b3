"""Exception taxonomy shared across the package.

Every error carries an ``exit_code`` so the CLI and the HTTP layer map
failures consistently: 2 = configuration, 3 = data, 4 = model, 5 = numerical.
"""


class ConlexError(Exception):
    exit_code = 1


class ConfigError(ConlexError):
    """Invalid configuration or flag combination."""

    exit_code = 2


class SchemaError(ConlexError):
    """Input file does not match the expected schema."""

    exit_code = 3


class InsufficientData(ConlexError):
    """Too few usable rows (or label values) to proceed."""

    exit_code = 3


class InvalidTrainingData(ConlexError):
    """Training inputs violate the trainer's preconditions."""

    exit_code = 4


class DimensionError(ConlexError):
    """Batch shape does not match the model's feature count."""

    exit_code = 4


class ModelUnavailable(ConlexError):
    """External model host failed, timed out, or broke the protocol."""

    exit_code = 4

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic


class SingleClassNeighborhood(ConlexError):
    """Every surrogate sample got the same hard label; balancing is impossible."""

    exit_code = 5


class SingularSystem(ConlexError):
    """Linear system is singular; advise a positive ridge strength."""

    exit_code = 5


class DegenerateComponent(ConlexError):
    """A mixture component lost all of its points and reseeding did not help."""

    exit_code = 5


class IllConditioned(ConlexError):
    """Hessian condition estimate too large for a trustworthy solve."""

    exit_code = 5
