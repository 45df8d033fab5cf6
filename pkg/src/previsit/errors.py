class PrevisitError(Exception):
    """Base class for all pipeline errors."""


# providers
class ProviderError(PrevisitError):
    pass


class ProviderUnavailable(ProviderError):
    def __init__(self, message: str, attempts: int = 0):
        super().__init__(message)
        self.attempts = attempts


class AuthError(ProviderError):
    pass


class BadRequest(ProviderError):
    pass


# prompts and parsing
class TemplateError(PrevisitError):
    pass


class EmptyInput(PrevisitError):
    pass


class EmptyExtraction(PrevisitError):
    pass


class ExtractionFailed(PrevisitError):
    pass


class NetworkFailed(PrevisitError):
    pass


# similarity and clustering
class DimensionMismatch(PrevisitError):
    pass


class ZeroVector(PrevisitError):
    pass


class EmptyEdgeSet(PrevisitError):
    def __init__(self, message: str, network_id: str | None = None):
        super().__init__(message)
        self.network_id = network_id


class InvalidCutoff(PrevisitError):
    pass


class EmptyCluster(PrevisitError):
    pass


class NoUsableNetworks(PrevisitError):
    pass


# questionnaires and evaluation
class EmptyKnowledge(PrevisitError):
    pass


class EmptyQuestionnaire(PrevisitError):
    pass


class GenerationFailed(PrevisitError):
    pass


class EmptyFacts(PrevisitError):
    pass


class SubjectMismatch(PrevisitError):
    pass
