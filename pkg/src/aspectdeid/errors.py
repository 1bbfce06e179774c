"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for all engine errors."""


class InvalidInputError(EngineError):
    """An argument violates an operation's precondition."""


class CorpusError(EngineError):
    """Corpus file is malformed or violates a corpus invariant."""


class ConfigError(EngineError):
    """Configuration is missing, unparsable, or inconsistent."""


class ShapeError(EngineError):
    """Array dimensions do not conform."""


class MissingLabelError(EngineError):
    """A person has no scored note or no grade label where one is required."""


class InvalidSplitError(EngineError):
    """Requested train/test split would leave one side empty."""


class DegenerateDocumentError(EngineError):
    """Document too short for the requested operation (needs >= 2 sub-sentences)."""


class UntrainedParamsError(EngineError):
    """Inference was requested on parameters that were never trained."""


class AnonymityInfeasibleError(EngineError):
    """The pool cannot supply k-1 distinct other persons at any radius."""


class ArtifactError(EngineError):
    """A pipeline artifact is missing or cannot be written."""


class ArtifactVersionError(ArtifactError):
    """An artifact file has an unsupported version or bad integrity hash."""
