"""Per-subject statistics and the three matchers: Euclidean, Mahalanobis and
the Gaussian empirical-rule feature count."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DimensionMismatch, NoTemplates, SingularCovariance
from .features import N_FEATURES, FeatureVector

STD_FLOOR = 1e-6
COV_MODELS = ("diagonal", "shrunk")


@dataclass(frozen=True)
class MatcherConfig:
    k: int = 3
    cov_model: str = "diagonal"
    shrinkage: float = 0.1  # lambda = shrinkage * trace / n_features
    weights: tuple | None = None  # per-feature C_i; None means all ones

    def validate(self):
        if self.k not in (1, 2, 3):
            raise ValueError(f"k must be 1, 2 or 3, got {self.k}")
        if self.cov_model not in COV_MODELS:
            raise ValueError(f"cov_model must be one of {COV_MODELS}")
        if self.shrinkage < 0:
            raise ValueError("shrinkage must be >= 0")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.ndim != 1 or not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ValueError("weights must be finite values >= 0")

    def weight_vector(self, n=N_FEATURES):
        if self.weights is None:
            return np.ones(n)
        return np.asarray(self.weights, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class SubjectStats:
    subject: str
    mean: np.ndarray
    std: np.ndarray
    weights: np.ndarray
    cov_model: str = "diagonal"
    lam: float = 0.0
    n_templates: int = 1
    cov: np.ndarray | None = None  # full matrix incl. ridge, shrunk model only
    _chol: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("mean", "std", "weights"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.cov_model == "shrunk":
            if self.cov is None:
                raise ValueError("shrunk covariance model needs the covariance matrix")
            cov = np.array(self.cov, dtype=np.float64)
            cov.setflags(write=False)
            object.__setattr__(self, "cov", cov)
            try:
                object.__setattr__(self, "_chol", linalg.cho_factor(cov, lower=True))
            except linalg.LinAlgError:
                raise SingularCovariance(f"covariance of {self.subject!r} is not positive definite") from None

    @property
    def dim(self):
        return self.mean.shape[0]

    def to_dict(self):
        d = {
            "subject": self.subject,
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "weights": self.weights.tolist(),
            "cov_model": self.cov_model,
            "lambda": self.lam,
            "n_templates": self.n_templates,
        }
        if self.cov is not None:
            d["cov"] = self.cov.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(subject=d["subject"], mean=d["mean"], std=d["std"], weights=d["weights"],
                   cov_model=d["cov_model"], lam=d["lambda"], n_templates=d["n_templates"],
                   cov=d.get("cov"))


@dataclass(frozen=True)
class ScoreTriple:
    raw_ed: float
    raw_md: float
    raw_ge: int
    n_features: int = N_FEATURES

    @property
    def s_ed(self) -> float:
        return 1.0 / (1.0 + self.raw_ed)

    @property
    def s_md(self) -> float:
        return 1.0 / (1.0 + self.raw_md)

    @property
    def s_ge(self) -> float:
        return self.raw_ge / self.n_features

    def as_vector(self) -> np.ndarray:
        return np.array([self.s_ed, self.s_md, self.s_ge])


def _values(q):
    return q.values if isinstance(q, FeatureVector) else np.asarray(q, dtype=np.float64)


def fit_subject_stats(templates, cfg: MatcherConfig | None = None, subject: str = "") -> SubjectStats:
    cfg = cfg or MatcherConfig()
    cfg.validate()
    if len(templates) == 0:
        raise NoTemplates(f"subject {subject!r} has no templates")
    rows = [_values(t) for t in templates]
    dims = {r.shape for r in rows}
    if len(dims) != 1:
        raise DimensionMismatch(f"templates of {subject!r} have mixed lengths {sorted(dims)}")
    x = np.vstack(rows)
    mean = x.mean(axis=0)
    std = np.maximum(x.std(axis=0), STD_FLOOR)
    weights = np.ones_like(mean) if cfg.weights is None else cfg.weight_vector()
    if weights.shape != mean.shape:
        raise DimensionMismatch(f"{weights.shape[0]} weights for {mean.shape[0]} features")
    if cfg.cov_model == "diagonal":
        return SubjectStats(subject, mean, std, weights, "diagonal", 0.0, len(rows))
    centered = x - mean
    sample = centered.T @ centered / len(rows)
    d = mean.shape[0]
    lam = max(cfg.shrinkage * float(np.trace(sample)) / d, STD_FLOOR ** 2)
    return SubjectStats(subject, mean, std, weights, "shrunk", lam, len(rows),
                        cov=sample + lam * np.eye(d))


def _check(q, s: SubjectStats):
    v = _values(q)
    if v.shape != s.mean.shape:
        raise DimensionMismatch(f"query has {v.shape[0]} features, stats have {s.dim}")
    return v


def euclidean_distance(q, s: SubjectStats) -> float:
    """Weighted, sigma-scaled distance: sqrt(mean_i C_i (x_i - m_i)^2 / s_i^2)."""
    v = _check(q, s)
    z = (v - s.mean) / s.std
    return float(np.sqrt(np.dot(s.weights, z * z) / v.shape[0]))


def mahalanobis_distance(q, s: SubjectStats) -> float:
    v = _check(q, s)
    d = v - s.mean
    if s.cov_model == "diagonal":
        z = d / s.std
        return float(np.sqrt(np.dot(z, z)))
    sol = linalg.cho_solve(s._chol, d)
    quad = float(np.dot(d, sol))
    if quad < 0:  # only rounding can get here for a PD matrix
        quad = 0.0
    return float(np.sqrt(quad))


def empirical_match_count(q, s: SubjectStats, k: int = 3) -> int:
    """Number of features within ``k`` standard deviations of the enrolled mean."""
    if k not in (1, 2, 3):
        raise ValueError(f"k must be 1, 2 or 3, got {k}")
    v = _check(q, s)
    return int(np.count_nonzero(np.abs(s.mean - v) <= k * s.std))


def score_triple(q, s: SubjectStats, cfg: MatcherConfig | None = None) -> ScoreTriple:
    cfg = cfg or MatcherConfig()
    return ScoreTriple(
        raw_ed=euclidean_distance(q, s),
        raw_md=mahalanobis_distance(q, s),
        raw_ge=empirical_match_count(q, s, cfg.k),
        n_features=s.dim,
    )
