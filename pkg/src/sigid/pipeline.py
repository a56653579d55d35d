"""End-to-end orchestration over a dataset manifest."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .config import RunConfig
from .features import extract
from .fusion import build_training_samples, prune_dependent_svs, train
from .identification import Query, enroll, evaluate
from .imaging import preprocess, read_image

log = logging.getLogger(__name__)


def features_for(path, cfg: RunConfig):
    views = preprocess(read_image(path), cfg.preprocess)
    return extract(views, cfg.features)


@dataclass
class DatasetFeatures:
    enroll: dict     # subject -> [FeatureVector]
    genuine: list    # [Query]
    forgery: list    # [Query]


def extract_dataset(manifest, cfg: RunConfig) -> DatasetFeatures:
    """Features for every manifest file; nothing outside the manifest is read."""
    enroll_map, genuine, forgery = {}, [], []
    n_enroll = cfg.evaluation.n_enroll
    for s in manifest.subjects:
        files = list(s.genuine)
        enroll_files = list(s.enroll) if len(s.enroll) == n_enroll else files[:n_enroll]
        test_files = [f for f in files if f not in enroll_files]
        enroll_map[s.subject] = [features_for(manifest.path(f), cfg) for f in enroll_files]
        genuine += [Query(s.subject, features_for(manifest.path(f), cfg), f) for f in test_files]
        forgery += [Query(s.subject, features_for(manifest.path(f), cfg), f) for f in s.forgery]
    log.info("extracted %d enrollment, %d genuine test, %d forgery signatures",
             sum(map(len, enroll_map.values())), len(genuine), len(forgery))
    return DatasetFeatures(enroll_map, genuine, forgery)


def fit(enroll_map, cfg: RunConfig):
    """Gallery plus fusion SVM trained on leave-one-out genuine/impostor pairs."""
    gallery = enroll(enroll_map, cfg.matcher)
    samples = build_training_samples(enroll_map, cfg.matcher, cfg.svm.neg_ratio,
                                     cfg.svm.seed, stats=gallery.entries)
    model = train(samples, C=cfg.svm.C, tol=cfg.svm.tol,
                  max_iters=cfg.svm.max_iters, seed=cfg.svm.seed)
    if cfg.svm.prune:
        model = prune_dependent_svs(model, cfg.svm.prune_eps)
    log.info("fusion SVM: %d support vectors, w=%s, b=%.6g, converged=%s",
             len(model.alphas), model.weight_vector().round(6).tolist(), model.bias,
             model.converged)
    return gallery, model


def run_evaluation(manifest, cfg: RunConfig):
    data = extract_dataset(manifest, cfg)
    gallery, model = fit(data.enroll, cfg)
    report = evaluate(gallery, model, data.genuine, data.forgery)
    report.config = cfg.to_dict()
    return report, gallery, model
