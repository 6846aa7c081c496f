"""textloop: interactive review/feedback/retrain over boolean text variables."""

from .corpus import (
    Corpus,
    Document,
    Report,
    ReportKind,
    Sentence,
    Token,
    load_corpus,
    load_seed_labels,
    normalize_phrase,
    segment_sentences,
    tokenize,
)
from .engine import DiffReport, Engine, EngineConfig
from .errors import TextLoopError
from .feedback import FeedbackItem, FeedbackKind, FeedbackLedger, snap_span
from .learner import (
    FeatureVector,
    Hyperparams,
    PredictedClass,
    Prediction,
    VariableModel,
    extract_features,
    predict,
    top_terms,
    train,
)
from .synth import GoldInfo, SynthSpec, VariableRule, generate_synthetic_corpus
from .wordtree import WordTree, build_tree, coverage, document_filter, drill_down, revert

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "DiffReport",
    "Document",
    "Engine",
    "EngineConfig",
    "FeatureVector",
    "FeedbackItem",
    "FeedbackKind",
    "FeedbackLedger",
    "GoldInfo",
    "Hyperparams",
    "PredictedClass",
    "Prediction",
    "Report",
    "ReportKind",
    "Sentence",
    "SynthSpec",
    "TextLoopError",
    "Token",
    "VariableModel",
    "VariableRule",
    "WordTree",
    "build_tree",
    "coverage",
    "document_filter",
    "drill_down",
    "extract_features",
    "generate_synthetic_corpus",
    "load_corpus",
    "load_seed_labels",
    "normalize_phrase",
    "predict",
    "revert",
    "segment_sentences",
    "snap_span",
    "tokenize",
    "top_terms",
    "train",
]
