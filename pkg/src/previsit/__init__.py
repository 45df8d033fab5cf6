"""EMR to pre-consultation questionnaire pipeline."""

from .models import (
    AtomicAssertion,
    CausalNetwork,
    ClusterResult,
    DiseaseKnowledge,
    EmrDocument,
    KnowledgeEntry,
    Question,
    Questionnaire,
    SimilarityMatrix,
    validate_assertions,
    validate_network,
)

__version__ = "0.1.0"

__all__ = [
    "AtomicAssertion",
    "CausalNetwork",
    "ClusterResult",
    "DiseaseKnowledge",
    "EmrDocument",
    "KnowledgeEntry",
    "Question",
    "Questionnaire",
    "SimilarityMatrix",
    "validate_assertions",
    "validate_network",
]
