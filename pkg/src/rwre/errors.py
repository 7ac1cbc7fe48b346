"""Exception types shared across the package."""


class BalanceError(ValueError):
    """An atom or site violates the balance normalization sum(2*p_i) = 1."""


class DegenerateLawError(ValueError):
    """Some lattice axis has zero weight under every atom of the law."""


class ProbabilityError(ValueError):
    """Atom probabilities are negative or do not sum to one."""


class CapacityError(MemoryError):
    """Requested box does not fit in addressable memory."""


class FormatError(ValueError):
    """Malformed environment file.  Carries the byte offset of the defect."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class BoxEscapeError(RuntimeError):
    """A walk or recursion left the sampled box before its stop rule fired."""


class DomainError(ValueError):
    """A site function is missing a value required by the operation."""


class SolverError(RuntimeError):
    """Linear solver could not reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotSigmaHarmonicError(ValueError):
    """Custom polynomial coefficients violate the Sigma-trace identity."""


class WosTimeoutError(RuntimeError):
    """Walk-on-spheres failed to reach the boundary shell within the step cap."""


class SampleSizeError(RuntimeError):
    """Not enough samples (e.g. sink pairs) to produce the requested statistic."""


class ConfigError(ValueError):
    """Invalid experiment configuration.  Names the offending field."""

    def __init__(self, field, message=""):
        super().__init__(f"config field '{field}': {message}" if message else f"config field '{field}'")
        self.field = field


class ZeroInfimumWarning(UserWarning):
    """A nonnegative harmonic function vanished on the inner ball."""
