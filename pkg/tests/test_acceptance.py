"""Acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line that is repeated in the terminal
summary, then asserts. Run just these with::

    pytest tests/test_acceptance.py -v
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy import ndimage

from sigid.config import RunConfig
from sigid.features import N_FEATURES, FeatureVector
from sigid.fusion import (FusionSample, decide, decision_value, fit_dual, kkt_violations,
                          prune_dependent_svs, train)
from sigid.identification import cmc
from sigid.imaging import BinaryImage, GrayImage, extract_hpr, otsu_threshold, thin
from sigid.matchers import (MatcherConfig, SubjectStats, empirical_match_count, euclidean_distance,
                            fit_subject_stats, mahalanobis_distance)
from sigid.persist import dumps
from sigid.pipeline import run_evaluation
from sigid.synth import synth_dataset

from conftest import stroke_image

PROBE_GRID = np.array(list(itertools.product(np.linspace(0, 1, 11), repeat=3)))


def run_benchmark(root):
    t0 = time.perf_counter()
    manifest = synth_dataset(root, n_subjects=40, genuine_per_subject=9, forgers_per_subject=3,
                             seed=42, n_enroll=6)
    report, _, _ = run_evaluation(manifest, RunConfig())
    return report, time.perf_counter() - t0


@pytest.fixture(scope="module")
def benchmark(tmp_path_factory):
    return run_benchmark(tmp_path_factory.mktemp("bench_a"))


def separable_set(rng, n=50, gap=0.25):
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    x = rng.uniform(0, 1, (n, 3))
    side = (x - 0.5) @ direction
    keep = np.abs(side) > gap / 2
    return [FusionSample(m, 1 if s > 0 else -1) for m, s in zip(x[keep], side[keep])]


def rel_err(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# ---------------------------------------------------------------------------

def test_criterion_1_fusion_dominance(benchmark, record_criterion):
    report, seconds = benchmark
    r = report.rank1
    singles = [r["ed"], r["md"], r["ge"]]
    ok = (r["fused"] >= max(singles) - 0.01 and r["fused"] > np.mean(singles) and seconds < 120)
    detail = (f"fused {r['fused']:.4f}, ed {r['ed']:.4f}, md {r['md']:.4f}, ge {r['ge']:.4f}, "
              f"{seconds:.1f}s")
    assert record_criterion(1, "fusion dominance", ok, detail)


def test_criterion_2_matcher_oracles(record_criterion):
    rng = np.random.default_rng(2)
    worst_ed = worst_md = 0.0
    ge_mismatch = 0
    for i in range(1000):
        cov_model = "diagonal" if i % 2 == 0 else "shrunk"
        templates = rng.normal(rng.normal(0, 4, N_FEATURES), rng.uniform(0.05, 3, N_FEATURES),
                               (int(rng.integers(2, 8)), N_FEATURES))
        w = tuple(rng.uniform(0, 2, N_FEATURES))
        s = fit_subject_stats([FeatureVector(t) for t in templates],
                              MatcherConfig(cov_model=cov_model, weights=w))
        q = s.mean + rng.normal(0, 2, N_FEATURES) * s.std
        # brute force straight from the definitions
        ed = math.sqrt(sum(w[j] * ((q[j] - s.mean[j]) / s.std[j]) ** 2 for j in range(N_FEATURES)) / N_FEATURES)
        if cov_model == "diagonal":
            md = math.sqrt(sum(((q[j] - s.mean[j]) / s.std[j]) ** 2 for j in range(N_FEATURES)))
        else:
            d = q - s.mean
            md = math.sqrt(float(d @ np.linalg.solve(s.cov, d)))
        k = int(rng.integers(1, 4))
        ge = sum(abs(s.mean[j] - q[j]) <= k * s.std[j] for j in range(N_FEATURES))
        worst_ed = max(worst_ed, rel_err(euclidean_distance(q, s), ed))
        worst_md = max(worst_md, rel_err(mahalanobis_distance(q, s), md))
        ge_mismatch += empirical_match_count(q, s, k) != ge
    ok = worst_ed <= 1e-9 and worst_md <= 1e-9 and ge_mismatch == 0
    detail = f"max rel err ed {worst_ed:.1e}, md {worst_md:.1e}; count mismatches {ge_mismatch}"
    assert record_criterion(2, "matcher oracle equivalence", ok, detail)


def test_criterion_3_mahalanobis_identity(record_criterion):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        mean = rng.normal(0, 5, N_FEATURES)
        std = rng.uniform(0.01, 4, N_FEATURES)
        s = SubjectStats("x", mean, std, np.ones(N_FEATURES))
        q = mean + rng.normal(0, 3, N_FEATURES)
        worst = max(worst, rel_err(mahalanobis_distance(q, s),
                                   math.sqrt(N_FEATURES) * euclidean_distance(q, s)))
    ok = worst <= 1e-9
    assert record_criterion(3, "MD == sqrt(173) * ED", ok, f"max rel err {worst:.1e} over 100 pairs")


def test_criterion_4_empirical_rule_monte_carlo(record_criterion):
    rng = np.random.default_rng(4)
    mean = rng.normal(0, 5, N_FEATURES)
    std = rng.uniform(0.1, 3, N_FEATURES)
    s = SubjectStats("x", mean, std, np.ones(N_FEATURES))
    n_draws = 100_000
    n_vec = math.ceil(n_draws / N_FEATURES)
    queries = mean + rng.standard_normal((n_vec, N_FEATURES)) * std
    rates = {}
    for k, target in ((1, 0.68), (2, 0.95), (3, 0.997)):
        passed = sum(empirical_match_count(q, s, k) for q in queries)
        rates[k] = passed / (n_vec * N_FEATURES)
    ok = all(abs(rates[k] - t) <= 0.01 for k, t in ((1, 0.68), (2, 0.95), (3, 0.997)))
    detail = ", ".join(f"k={k}: {rates[k]:.4f}" for k in (1, 2, 3)) + f" over {n_vec * N_FEATURES} draws"
    assert record_criterion(4, "empirical rule Monte-Carlo", ok, detail)


def test_criterion_5_svm_correctness(record_criterion):
    toy = train([FusionSample((-1, 0, 0), -1), FusionSample((1, 0, 0), 1)], C=1e3)
    f_err = max(abs(decision_value(toy, (x, 0.2, -0.4)) - x) for x in np.linspace(-2, 2, 21))
    toy_ok = (abs(toy.bias) <= 1e-3 and np.all(np.abs(toy.alphas - 0.5) <= 1e-3)
              and toy.alphas.size == 2 and f_err <= 1e-9)
    rng = np.random.default_rng(5)
    kkt_fail = 0
    collapse = 0.0
    for _ in range(20):
        samples = separable_set(rng)
        sol = fit_dual(samples, C=10.0, tol=1e-3)
        kkt_fail += (not sol.converged) or kkt_violations(sol, 10.0, 1e-3).size > 0
        model = train(samples, C=10.0, tol=1e-3)
        w = sum(a * y * sv for a, y, sv in zip(model.alphas, model.labels, model.support_vectors))
        for m in rng.uniform(-1, 2, (50, 3)):
            collapse = max(collapse, abs(decision_value(model, m) - (float(w @ m) + model.bias)))
    ok = toy_ok and kkt_fail == 0 and collapse <= 1e-9
    detail = (f"toy alpha {toy.alphas.round(6).tolist()}, b {toy.bias:.1e}; "
              f"KKT failures {kkt_fail}/20; collapsed-form max diff {collapse:.1e}")
    assert record_criterion(5, "SVM correctness", ok, detail)


def test_criterion_6_pruning_safety(record_criterion):
    rng = np.random.default_rng(6)
    flips = 0
    shrunk = 0
    for _ in range(20):
        samples = separable_set(rng, n=int(rng.integers(20, 80)), gap=rng.uniform(0.0, 0.3))
        model = train(samples, C=float(rng.choice([1.0, 10.0, 100.0])))
        pruned = prune_dependent_svs(model, 1e-8)
        shrunk += pruned.alphas.size <= model.alphas.size
        before = [decide(model, m) for m in PROBE_GRID]
        after = [decide(pruned, m) for m in PROBE_GRID]
        flips += sum(a != b for a, b in zip(before, after))
    ok = flips == 0 and shrunk == 20
    assert record_criterion(6, "pruning safety", ok, f"{flips} decision flips on 20 x 11^3 probes")


def test_criterion_7_cmc_properties(benchmark, small_dataset, small_config, record_criterion):
    small, _, _ = run_evaluation(small_dataset, small_config)
    problems = []
    for name, report in (("benchmark", benchmark[0]), ("small", small)):
        for m, p in report.curves.items():
            if np.any(np.diff(p) < 0):
                problems.append(f"{name}/{m} not monotone")
            if p[-1] != 1.0:
                problems.append(f"{name}/{m} p[N]={p[-1]}")
            if p[0] != report.rank1[m]:
                problems.append(f"{name}/{m} p[1] != rank-1")
    ranks = np.random.default_rng(7).integers(1, 41, 500)
    p = cmc(ranks, 40)
    if np.any(np.diff(p) < 0) or p[-1] != 1.0 or p[0] != np.mean(ranks == 1):
        problems.append("random ranks")
    ok = not problems
    assert record_criterion(7, "CMC properties", ok, "; ".join(problems) or "8 curves and 1 random set checked")


def _blob(rng):
    f = ndimage.gaussian_filter(rng.random((int(rng.integers(20, 60)), int(rng.integers(20, 80)))),
                                rng.uniform(0.8, 3.0))
    return f > np.quantile(f, rng.uniform(0.3, 0.85))


def test_criterion_8_imaging_oracles(record_criterion):
    rng = np.random.default_rng(8)
    otsu_bad = 0
    for _ in range(50):
        px = rng.integers(0, 256, int(rng.integers(50, 2000))).astype(np.uint8)
        if rng.random() < 0.5:  # bimodal histograms too
            px = np.clip(np.r_[rng.normal(60, 20, 300), rng.normal(200, 15, 700)], 0, 255).astype(np.uint8)
        vals = px.astype(np.float64)

        def score(t):
            lo, hi = vals[vals <= t], vals[vals > t]
            if lo.size == 0 or hi.size == 0:
                return 0.0
            return lo.size * hi.size * (lo.mean() - hi.mean()) ** 2
        best = max(score(t) for t in range(256))
        otsu_bad += not math.isclose(score(otsu_threshold(px)), best, rel_tol=1e-9)
    thin_bad = 0
    for _ in range(100):
        once = thin(BinaryImage(_blob(rng)))
        thin_bad += thin(once) != once
    hpr_bad = 0
    for seed in range(20):
        gray = GrayImage(stroke_image(seed=seed))
        sizes = [extract_hpr(gray, f).count for f in (0.55, 0.75, 0.85)]
        hpr_bad += not (sizes[0] >= sizes[1] >= sizes[2])
    ok = otsu_bad == 0 and thin_bad == 0 and hpr_bad == 0
    detail = f"otsu {50 - otsu_bad}/50, thinning {100 - thin_bad}/100, hpr {20 - hpr_bad}/20"
    assert record_criterion(8, "imaging oracles", ok, detail)


def test_criterion_9_determinism(benchmark, tmp_path_factory, record_criterion):
    second, _ = run_benchmark(tmp_path_factory.mktemp("bench_b"))
    a, b = dumps(benchmark[0]), dumps(second)
    ok = a == b
    assert record_criterion(9, "determinism", ok, f"report bytes {'identical' if ok else 'differ'} ({len(a)} bytes)")
