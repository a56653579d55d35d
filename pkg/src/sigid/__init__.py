"""Offline signature identification: geometric features, three statistical
matchers, SVM score fusion and CMC evaluation."""

from ._backend import BACKEND
from .features import FEATURE_NAMES, FeatureVector, extract
from .fusion import SvmModel, decide, decision_value, prune_dependent_svs, train
from .identification import Gallery, cmc, enroll, evaluate, identify, rank_of
from .imaging import BinaryImage, GrayImage, SignatureViews, preprocess
from .matchers import ScoreTriple, SubjectStats, fit_subject_stats, score_triple

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "FEATURE_NAMES", "FeatureVector", "extract",
    "SvmModel", "decide", "decision_value", "prune_dependent_svs", "train",
    "Gallery", "cmc", "enroll", "evaluate", "identify", "rank_of",
    "BinaryImage", "GrayImage", "SignatureViews", "preprocess",
    "ScoreTriple", "SubjectStats", "fit_subject_stats", "score_triple",
]
