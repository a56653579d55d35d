"""One-vs-all identification, rank statistics and CMC evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTrials, NoTemplates, SchemaMismatch, UnknownSubject
from .features import SCHEMA_ID, FeatureVector
from .fusion import SvmModel, decision_values
from .matchers import MatcherConfig, SubjectStats, fit_subject_stats, score_triple

MATCHERS = ("fused", "ed", "md", "ge")


@dataclass(frozen=True, eq=False)
class Gallery:
    entries: dict
    schema_id: str = SCHEMA_ID
    matcher_cfg: MatcherConfig = field(default_factory=MatcherConfig)

    def __post_init__(self):
        if not self.entries:
            raise NoTemplates("a gallery needs at least one subject")
        dims = {s.dim for s in self.entries.values()}
        if len(dims) != 1:
            raise SchemaMismatch(f"gallery subjects disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "entries", dict(sorted(self.entries.items())))

    @property
    def subjects(self):
        return list(self.entries)

    def __len__(self):
        return len(self.entries)

    def to_dict(self):
        cfg = self.matcher_cfg
        return {
            "schema_id": self.schema_id,
            "matcher": {"k": cfg.k, "cov_model": cfg.cov_model, "shrinkage": cfg.shrinkage,
                        "weights": None if cfg.weights is None else list(cfg.weights)},
            "subjects": [s.to_dict() for s in self.entries.values()],
        }

    @classmethod
    def from_dict(cls, d):
        m = d["matcher"]
        cfg = MatcherConfig(k=m["k"], cov_model=m["cov_model"], shrinkage=m["shrinkage"],
                            weights=None if m["weights"] is None else tuple(m["weights"]))
        entries = {}
        for sd in d["subjects"]:
            s = SubjectStats.from_dict(sd)
            entries[s.subject] = s
        return cls(entries=entries, schema_id=d["schema_id"], matcher_cfg=cfg)


def enroll(templates, cfg: MatcherConfig | None = None) -> Gallery:
    """Fit per-subject statistics; ``templates`` maps subject id to FeatureVectors."""
    cfg = cfg or MatcherConfig()
    entries = {}
    for subject in sorted(templates):
        tpl = list(templates[subject])
        if not tpl:
            raise NoTemplates(f"subject {subject!r} has no templates")
        for t in tpl:
            if isinstance(t, FeatureVector) and t.schema_id != SCHEMA_ID:
                raise SchemaMismatch(f"template of {subject!r} uses schema {t.schema_id!r}")
        entries[subject] = fit_subject_stats(tpl, cfg, subject)
    return Gallery(entries=entries, matcher_cfg=cfg)


def _sort_desc(subjects, scores):
    """Descending by score, ascending subject id on ties."""
    order = sorted(range(len(subjects)), key=lambda i: (-scores[i], subjects[i]))
    return [(subjects[i], float(scores[i])) for i in order]


@dataclass(frozen=True)
class QueryScores:
    """Every matcher's score of one query against every enrolled subject."""
    subjects: tuple
    triples: tuple
    fused: tuple

    def ranked(self, matcher: str = "fused"):
        if matcher == "fused":
            scores = self.fused
        elif matcher == "ed":
            scores = [t.s_ed for t in self.triples]
        elif matcher == "md":
            scores = [t.s_md for t in self.triples]
        elif matcher == "ge":
            scores = [t.s_ge for t in self.triples]
        else:
            raise ValueError(f"unknown matcher {matcher!r}")
        return _sort_desc(list(self.subjects), list(scores))


def score_query(g: Gallery, model: SvmModel, q) -> QueryScores:
    if isinstance(q, FeatureVector) and q.schema_id != g.schema_id:
        raise SchemaMismatch(f"query schema {q.schema_id!r} != gallery schema {g.schema_id!r}")
    subjects = tuple(g.entries)
    triples = tuple(score_triple(q, g.entries[s], g.matcher_cfg) for s in subjects)
    fused = decision_values(model, np.array([t.as_vector() for t in triples]))
    return QueryScores(subjects, triples, tuple(float(f) for f in fused))


def identify(g: Gallery, model: SvmModel, q) -> list:
    """Ranked ``[(subject, fused score), ...]``, best first."""
    return score_query(g, model, q).ranked("fused")


def rank_of(ranked, true_subject) -> int:
    for pos, (subject, _) in enumerate(ranked, start=1):
        if subject == true_subject:
            return pos
    raise UnknownSubject(f"subject {true_subject!r} is not in the ranked list")


def cmc(ranks, n_subjects: int) -> np.ndarray:
    """p[r-1] = fraction of trials whose true subject is within the top r."""
    ranks = np.asarray(ranks, dtype=np.int64)
    if ranks.size == 0:
        raise EmptyTrials("CMC needs at least one trial")
    if ranks.min() < 1 or ranks.max() > n_subjects:
        raise ValueError(f"ranks must lie in [1, {n_subjects}]")
    hits = np.bincount(ranks, minlength=n_subjects + 1)[1:]
    return np.cumsum(hits) / ranks.size


@dataclass(frozen=True)
class Query:
    label: str       # genuine owner, or the subject a forgery imitates
    features: FeatureVector
    source: str = ""


@dataclass
class Report:
    n_subjects: int
    n_genuine: int
    n_forgery: int
    rank1: dict
    curves: dict
    forgery_rank1: dict | None
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "n_subjects": self.n_subjects,
            "n_genuine_queries": self.n_genuine,
            "n_forgery_queries": self.n_forgery,
            "rank1": self.rank1,
            "cmc": {k: [float(p) for p in v] for k, v in self.curves.items()},
            "forgery_rank1": self.forgery_rank1,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(n_subjects=d["n_subjects"], n_genuine=d["n_genuine_queries"],
                   n_forgery=d["n_forgery_queries"], rank1=d["rank1"],
                   curves={k: np.array(v) for k, v in d["cmc"].items()},
                   forgery_rank1=d["forgery_rank1"], config=d.get("config", {}))

    def cmc_rows(self):
        n = self.n_subjects
        return [(r + 1, *(float(self.curves[m][r]) for m in MATCHERS)) for r in range(n)]


def evaluate(g: Gallery, model: SvmModel, genuine_tests, forgery_tests=()) -> Report:
    """Genuine CMC per matcher plus the rate at which forgeries top their target."""
    genuine_tests = list(genuine_tests)
    forgery_tests = list(forgery_tests)
    n = len(g)
    for q in genuine_tests + forgery_tests:
        if q.label not in g.entries:
            raise UnknownSubject(f"query label {q.label!r} is not enrolled")
    ranks = {m: [] for m in MATCHERS}
    for q in genuine_tests:
        scores = score_query(g, model, q.features)
        for m in MATCHERS:
            ranks[m].append(rank_of(scores.ranked(m), q.label))
    curves = {m: cmc(ranks[m], n) for m in MATCHERS}
    rank1 = {m: float(curves[m][0]) for m in MATCHERS}
    forgery = None
    if forgery_tests:
        hits = {m: 0 for m in MATCHERS}
        for q in forgery_tests:
            scores = score_query(g, model, q.features)
            for m in MATCHERS:
                hits[m] += scores.ranked(m)[0][0] == q.label
        forgery = {m: hits[m] / len(forgery_tests) for m in MATCHERS}
    return Report(n_subjects=n, n_genuine=len(genuine_tests), n_forgery=len(forgery_tests),
                  rank1=rank1, curves=curves, forgery_rank1=forgery)


# ---------------------------------------------------------------------------
# CSV and SVG output

def cmc_csv(report: Report) -> str:
    lines = ["rank,p_fused,p_ed,p_md,p_ge"]
    for row in report.cmc_rows():
        lines.append(",".join([str(row[0])] + [repr(v) for v in row[1:]]))
    return "\n".join(lines) + "\n"


_COLOURS = {"fused": "#d62728", "ed": "#1f77b4", "md": "#2ca02c", "ge": "#9467bd"}
_LABELS = {"fused": "SVM fusion", "ed": "Euclidean", "md": "Mahalanobis", "ge": "Gaussian rule"}


def cmc_svg(report: Report, width: int = 560, height: int = 400) -> str:
    """Identification probability against rank, one polyline per matcher."""
    left, right, top, bottom = 60, 20, 20, 50
    pw, ph = width - left - right, height - top - bottom
    n = report.n_subjects
    lo = min(float(min(c.min() for c in report.curves.values())), 0.9)
    lo = np.floor(lo * 10) / 10

    def xy(r, p):
        x = left + (pw * (r - 1) / (n - 1) if n > 1 else pw / 2)
        y = top + ph * (1 - (p - lo) / (1 - lo)) if lo < 1 else top
        return f"{x:.2f},{y:.2f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for k in range(6):
        p = lo + (1 - lo) * k / 5
        y = top + ph * (1 - k / 5)
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end">{p:.2f}</text>')
    for r in sorted({1, n, *range(5, n + 1, 5)}):
        x = left + (pw * (r - 1) / (n - 1) if n > 1 else pw / 2)
        out.append(f'<text x="{x:.2f}" y="{top + ph + 16}" text-anchor="middle">{r}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">Rank</text>')
    out.append(f'<text x="14" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 14 {top + ph / 2})">Identification probability</text>')
    for i, m in enumerate(MATCHERS):
        pts = " ".join(xy(r + 1, float(p)) for r, p in enumerate(report.curves[m]))
        out.append(f'<polyline fill="none" stroke="{_COLOURS[m]}" stroke-width="2" points="{pts}"/>')
        ly = top + ph - 15 - 16 * (len(MATCHERS) - 1 - i)
        out.append(f'<line x1="{left + pw - 150}" y1="{ly}" x2="{left + pw - 125}" y2="{ly}" '
                   f'stroke="{_COLOURS[m]}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw - 120}" y="{ly + 4}">{_LABELS[m]} '
                   f'({report.rank1[m] * 100:.2f}%)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
