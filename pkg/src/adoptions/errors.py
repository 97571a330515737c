"""Exception hierarchy shared by every adoptions module.

Each exception carries the process exit code the CLI should use when it escapes
a command, so `cli.main` never has to guess.
"""


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ CONSTANT ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DEGENERATE = 3



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Base ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
class AdOptionsError(Exception):
    """Base class for all adoptions errors."""

    exit_code = EXIT_VALIDATION


class ValidationError(AdOptionsError, ValueError):
    """Inputs violate a documented precondition."""

    exit_code = EXIT_VALIDATION


class DegenerateDataError(AdOptionsError):
    """Inputs are well formed but numerically degenerate (zero variance, empty sets...)."""

    exit_code = EXIT_DEGENERATE



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Validation ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
class MalformedRowError(ValidationError):
    """A CSV row could not be parsed under the documented schema."""


class SeriesTooShortError(ValidationError):
    """A series has fewer observations than the operation needs."""


class MisalignedSeriesError(ValidationError):
    """Return series passed together do not share the same dates."""


class DimensionMismatchError(ValidationError):
    """Vectors that must have matching length do not."""


class GridTooLargeError(ValidationError):
    """A revenue grid would exceed the point limit."""


class ConfigError(ValidationError):
    """A run config is missing a key, has an unknown key, or a bad value."""


class MissingSubKeywordError(ValidationError):
    """A broad-match candidate references a sub-keyword that has no CPC."""



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Degenerate ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
class ZeroVarianceError(DegenerateDataError):
    """A keyword's returns have zero variance, so its correlations are undefined."""

    def __init__(self, keyword_id: str):
        """Name the offending keyword in the message."""
        super().__init__(f"keyword '{keyword_id}' has zero return variance; correlation undefined")
        self.keyword_id = keyword_id


class FactorizationError(DegenerateDataError):
    """Correlation matrix could not be factorized even after PSD repair."""


class DegenerateVolatilityError(DegenerateDataError):
    """A closed form needs sigma > 0 (or |rho| < 1) but got the degenerate limit."""


class EmptyKeywordSetError(DegenerateDataError):
    """No keyword survived loading."""
