"""Exception hierarchy. Every error raised on bad input derives from
:class:`TrajSamplerError` so callers can catch the whole family."""


class TrajSamplerError(ValueError):
    pass


class AllZeroWeights(TrajSamplerError):
    """A model emitted proposals whose weights are all zero."""


class EmptyEnsemble(TrajSamplerError):
    def __init__(self, message="ensemble has no models", line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class InconsistentHorizon(TrajSamplerError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class HorizonMismatch(TrajSamplerError):
    """Two trajectories compared by a metric have different lengths."""


class KExceedsSetSize(TrajSamplerError):
    pass


class KExceedsProposals(TrajSamplerError):
    pass


class KExceedsPositiveSupport(TrajSamplerError):
    pass


class MissingGroundTruth(TrajSamplerError):
    pass


class TooManyProposals(TrajSamplerError):
    pass


class Malformed(TrajSamplerError):
    def __init__(self, line, cause):
        self.line = line
        self.cause = cause
        super().__init__(f"line {line}: {cause}")


class ConfigError(TrajSamplerError):
    def __init__(self, field, message):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")
