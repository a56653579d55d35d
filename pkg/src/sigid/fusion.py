"""Score-level fusion with a soft-margin SVM over (s_ed, s_md, s_ge) triples.

The dual is solved by SMO with second-order working-set selection; the
pair-update loop runs in the compiled backend when it is available.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import DegenerateTrainingSet
from .matchers import MatcherConfig, fit_subject_stats, score_triple

log = logging.getLogger(__name__)

KERNELS = ("linear",)


@dataclass(frozen=True)
class FusionSample:
    m: tuple
    label: int

    def __post_init__(self):
        if self.label not in (1, -1):
            raise ValueError(f"label must be +1 or -1, got {self.label}")
        object.__setattr__(self, "m", tuple(float(x) for x in self.m))


@dataclass(frozen=True)
class SvmConfig:
    C: float = 10.0
    tol: float = 1e-3
    max_iters: int = 10_000
    seed: int = 42
    neg_ratio: int = 5
    prune: bool = False
    prune_eps: float = 1e-8

    def validate(self):
        if not self.C > 0:
            raise ValueError("C must be > 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.neg_ratio < 1:
            raise ValueError("neg_ratio must be >= 1")


@dataclass(frozen=True, eq=False)
class SvmModel:
    support_vectors: np.ndarray  # (n_sv, 3)
    labels: np.ndarray           # (n_sv,) of +1/-1
    alphas: np.ndarray           # (n_sv,)
    bias: float
    C: float
    tol: float
    kernel: str = "linear"
    converged: bool = True
    pruned: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        sv = np.array(self.support_vectors, dtype=np.float64).reshape(-1, 3)
        labels = np.array(self.labels, dtype=np.float64).reshape(-1)
        alphas = np.array(self.alphas, dtype=np.float64).reshape(-1)
        if not (sv.shape[0] == labels.shape[0] == alphas.shape[0]):
            raise ValueError("support vectors, labels and alphas differ in length")
        if self.kernel not in KERNELS:
            raise ValueError(f"unsupported kernel {self.kernel!r}")
        for arr in (sv, labels, alphas):
            arr.setflags(write=False)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "bias", float(self.bias) + 0.0)  # no -0.0 in JSON

    @property
    def coef(self) -> np.ndarray:
        """alpha_i * y_i per support vector."""
        return self.alphas * self.labels

    def weight_vector(self) -> np.ndarray:
        return self.coef @ self.support_vectors

    def to_dict(self):
        return {
            "kernel": self.kernel,
            "C": self.C,
            "tol": self.tol,
            "bias": self.bias,
            "support_vectors": self.support_vectors.tolist(),
            "labels": [int(y) for y in self.labels],
            "alphas": self.alphas.tolist(),
            "converged": self.converged,
            "pruned": self.pruned,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(support_vectors=d["support_vectors"], labels=d["labels"], alphas=d["alphas"],
                   bias=d["bias"], C=d["C"], tol=d["tol"], kernel=d["kernel"],
                   converged=d["converged"], pruned=d["pruned"], metadata=d["metadata"])


def kernel(a, b) -> float:
    return float(np.dot(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)))


def gram(a, b=None) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = a if b is None else np.asarray(b, dtype=np.float64)
    return a @ b.T


def _symmetric_gram(x):
    k = gram(x)
    return np.ascontiguousarray((k + k.T) / 2)


def _bias(y, alpha, grad, C):
    """Average of -y*grad over free multipliers, else the midpoint of the bounds."""
    yg = y * grad
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        rho = float(yg[free].mean())
    else:
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = float(yg[ub_mask].min()) if ub_mask.any() else np.inf
        lb = float(yg[lb_mask].max()) if lb_mask.any() else -np.inf
        if np.isfinite(ub) and np.isfinite(lb):
            rho = (ub + lb) / 2
        else:
            rho = ub if np.isfinite(ub) else lb
    return -rho


def _violation(y, alpha, grad, C):
    pos = y > 0
    up = (pos & (alpha < C)) | (~pos & (alpha > 0))
    low = (pos & (alpha > 0)) | (~pos & (alpha < C))
    if not up.any() or not low.any():
        return 0.0
    return float((-y * grad)[up].max() - (-y * grad)[low].min())


def solve_dual(K, y, C, tol, max_updates):
    """Solve the soft-margin dual for a precomputed Gram matrix.

    Returns ``(alpha, bias, n_updates, converged)``.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = y.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)
    used = 0
    converged = False
    while used < max_updates:
        it, ok = _backend.smo_solve(K, y, float(C), alpha, grad, float(tol), int(max_updates - used))
        used += it
        # the incremental gradient drifts; confirm against a fresh one
        grad = (y * (K @ (alpha * y))) - 1.0
        if ok and _violation(y, alpha, grad, C) <= tol:
            converged = True
            break
        if not ok or it == 0:
            break
    return alpha, _bias(y, alpha, grad, C), used, converged


@dataclass(frozen=True, eq=False)
class DualSolution:
    x: np.ndarray
    y: np.ndarray
    alpha: np.ndarray
    bias: float
    updates: int
    converged: bool


def fit_dual(samples, C: float = 10.0, tol: float = 1e-3, max_iters: int = 10_000) -> DualSolution:
    """Solve the dual for ``samples``; ``max_iters`` counts passes of n pair updates."""
    samples = list(samples)
    if not samples:
        raise DegenerateTrainingSet("no training samples")
    x = np.array([s.m for s in samples], dtype=np.float64)
    y = np.array([s.label for s in samples], dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("training samples contain non-finite scores")
    if not ((y > 0).any() and (y < 0).any()):
        raise DegenerateTrainingSet("training set holds a single class")
    alpha, bias, used, converged = solve_dual(_symmetric_gram(x), y, C, tol, max_iters * len(samples))
    return DualSolution(x, y, alpha, bias, used, converged)


def train(samples, C: float = 10.0, tol: float = 1e-3, max_iters: int = 10_000, seed: int = 42) -> SvmModel:
    """Fit the fusion SVM.

    Working-set selection is deterministic, so ``seed`` only travels into the
    model metadata; impostor subsampling is where randomness enters. On
    non-convergence the last iterate comes back with ``converged=False``.
    """
    sol = fit_dual(samples, C, tol, max_iters)
    if not sol.converged:
        log.warning("SVM did not reach tol=%g within %d updates", tol, sol.updates)
    sv = sol.alpha > 0
    y = sol.y
    return SvmModel(
        support_vectors=sol.x[sv], labels=y[sv], alphas=sol.alpha[sv], bias=sol.bias,
        C=C, tol=tol, converged=sol.converged,
        metadata={"seed": seed, "n_samples": int(y.shape[0]),
                  "n_positive": int((y > 0).sum()), "n_negative": int((y < 0).sum()),
                  "updates": int(sol.updates)},
    )


def decision_value(model: SvmModel, m) -> float:
    """Fused score: sum_i alpha_i y_i K(m, m_i) + b."""
    m = np.asarray(m, dtype=np.float64)
    return float(np.dot(model.coef, model.support_vectors @ m) + model.bias)


def decision_values(model: SvmModel, ms) -> np.ndarray:
    ms = np.atleast_2d(np.asarray(ms, dtype=np.float64))
    return gram(ms, model.support_vectors) @ model.coef + model.bias


def decide(model: SvmModel, m) -> int:
    return 1 if decision_value(model, m) >= 0 else -1


def prune_dependent_svs(model: SvmModel, eps: float = 1e-8) -> SvmModel:
    """Drop support vectors whose kernel column is a combination of the others.

    The removed term alpha_k y_k K(., m_k) is folded into the survivors as
    alpha_k y_k c_i K(., m_i). Coefficients are stored as |beta_i| with the
    sign carried in the label, so a pruned model need not satisfy the dual
    constraints of a freshly trained one.
    """
    sv = model.support_vectors.copy()
    beta = model.coef.copy()
    changed = False
    k = sv.shape[0] - 1
    while k >= 0 and sv.shape[0] > 1:
        G = _symmetric_gram(sv)
        others = np.delete(np.arange(sv.shape[0]), k)
        A = G[:, others]
        c, *_ = np.linalg.lstsq(A, G[:, k], rcond=None)
        resid = float(np.linalg.norm(A @ c - G[:, k]))
        if resid <= eps:
            beta[others] += beta[k] * c
            sv = sv[others]
            beta = beta[others]
            changed = True
            k = min(k, sv.shape[0]) - 1
        else:
            k -= 1
    if not changed:
        return model
    keep = beta != 0
    return SvmModel(
        support_vectors=sv[keep], labels=np.where(beta[keep] >= 0, 1.0, -1.0),
        alphas=np.abs(beta[keep]), bias=model.bias, C=model.C, tol=model.tol,
        kernel=model.kernel, converged=model.converged, pruned=True,
        metadata=dict(model.metadata, n_sv_before_prune=int(model.support_vectors.shape[0])),
    )


def kkt_violations(sol: DualSolution, C: float, tol: float) -> np.ndarray:
    """Indices of samples breaking the soft-margin KKT conditions by more than tol."""
    f = gram(sol.x) @ (sol.alpha * sol.y) + sol.bias
    yf = sol.y * f
    a = sol.alpha
    bad = (((a <= 0) & (yf < 1 - tol))
           | ((a > 0) & (a < C) & (np.abs(yf - 1) > tol))
           | ((a >= C) & (yf > 1 + tol)))
    return np.flatnonzero(bad)


# ---------------------------------------------------------------------------
# training pairs

def build_training_samples(templates, matcher_cfg: MatcherConfig | None = None,
                           neg_ratio: int = 5, seed: int = 42, stats=None):
    """Leave-one-template-out genuine pairs plus subsampled impostor pairs.

    ``templates`` maps subject id to its enrollment FeatureVectors; ``stats``
    optionally supplies the already fitted per-subject statistics used for
    the impostor comparisons.
    """
    matcher_cfg = matcher_cfg or MatcherConfig()
    subjects = sorted(templates)
    if stats is None:
        stats = {s: fit_subject_stats(templates[s], matcher_cfg, s) for s in subjects}
    positives, negatives = [], []
    for s in subjects:
        tpl = list(templates[s])
        for i, held in enumerate(tpl):
            if len(tpl) > 1:
                rest = fit_subject_stats(tpl[:i] + tpl[i + 1:], matcher_cfg, s)
                positives.append(FusionSample(score_triple(held, rest, matcher_cfg).as_vector(), 1))
            for other in subjects:
                if other != s:
                    negatives.append(FusionSample(score_triple(held, stats[other], matcher_cfg).as_vector(), -1))
    rng = np.random.default_rng(seed)
    want = neg_ratio * len(positives)
    if len(negatives) > want:
        pick = np.sort(rng.choice(len(negatives), size=want, replace=False))
        negatives = [negatives[i] for i in pick]
    return positives + negatives
