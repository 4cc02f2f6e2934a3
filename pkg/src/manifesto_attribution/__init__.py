"""Attribute an unlabeled document to political parties with classifiers trained on party manifestos."""

from .attribution import AttributionReport, attribute_document, certainty_analysis, share_comparison
from .corpus import Corpus, Paragraph, PartyLabel, clean_text, corpus_stats, segment_paragraphs
from .evaluation import SplitConfig, confusion_matrix, evaluation_report, stratified_split
from .features import FeatureConfig, build_vocabulary, tokenize, vectorize
from .model import (
    Classifier,
    TrainConfig,
    fit_classifier,
    predict_distribution,
    train_naive_bayes,
    train_one_vs_rest,
    train_softmax,
)

__all__ = [
    "AttributionReport",
    "Classifier",
    "Corpus",
    "FeatureConfig",
    "Paragraph",
    "PartyLabel",
    "SplitConfig",
    "TrainConfig",
    "attribute_document",
    "build_vocabulary",
    "certainty_analysis",
    "clean_text",
    "confusion_matrix",
    "corpus_stats",
    "evaluation_report",
    "fit_classifier",
    "predict_distribution",
    "segment_paragraphs",
    "share_comparison",
    "stratified_split",
    "tokenize",
    "train_naive_bayes",
    "train_one_vs_rest",
    "train_softmax",
    "vectorize",
]
__version__ = "0.1.0"
