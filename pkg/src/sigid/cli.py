"""Command-line entry point: ``sigid <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import _backend
from .config import CONFIG_ENV, load_config
from .errors import SigidError
from .persist import atomic_write_text, load, persist

log = logging.getLogger("sigid")


def _existing(kind):
    def check(value):
        p = Path(value)
        if not p.exists():
            raise argparse.ArgumentTypeError(f"{kind} not found: {value}")
        return p
    return check


def _add_svm_overrides(p):
    g = p.add_argument_group("SVM overrides")
    g.add_argument("--C", dest="svm_C", type=float)
    g.add_argument("--tol", dest="svm_tol", type=float)
    g.add_argument("--max-iters", dest="svm_max_iters", type=int)
    g.add_argument("--seed", dest="svm_seed", type=int)
    g.add_argument("--prune", dest="svm_prune", action="store_true", default=None,
                   help="drop linearly dependent support vectors after training")


def build_parser():
    parser = argparse.ArgumentParser(prog="sigid", description=__doc__)
    parser.add_argument("--config", help=f"JSON run configuration (default: ${CONFIG_ENV})")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic signature corpus")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--subjects", type=int, default=40)
    p.add_argument("--genuine", type=int, default=9)
    p.add_argument("--forgeries", type=int, default=3)
    p.add_argument("--enroll", type=int, default=6)
    p.add_argument("--seed", type=int, default=42)

    p = sub.add_parser("preprocess", help="write the four preprocessed views of one image")
    p.add_argument("image", type=_existing("image"))
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--format", choices=("pgm", "png"), default="pgm")

    p = sub.add_parser("extract", help="feature CSV for images or a whole manifest")
    p.add_argument("images", nargs="*", type=_existing("image"))
    p.add_argument("--manifest", type=_existing("manifest"))
    p.add_argument("--label", default="", help="subject column for loose images")
    p.add_argument("--out", type=Path, help="CSV path (default: stdout)")

    p = sub.add_parser("enroll", help="fit per-subject statistics from a manifest")
    p.add_argument("--manifest", required=True, type=_existing("manifest"))
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("train", help="train the fusion SVM on enrollment data")
    p.add_argument("--manifest", required=True, type=_existing("manifest"))
    p.add_argument("--out", required=True, type=Path)
    _add_svm_overrides(p)

    p = sub.add_parser("identify", help="rank enrolled subjects for one query image")
    p.add_argument("image", type=_existing("image"))
    p.add_argument("--gallery", required=True, type=_existing("gallery"))
    p.add_argument("--model", required=True, type=_existing("model"))
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("evaluate", help="full benchmark: report, CMC CSV and SVG")
    p.add_argument("--manifest", required=True, type=_existing("manifest"))
    p.add_argument("--out", required=True, type=Path)
    _add_svm_overrides(p)
    return parser


def _resolve_config(args):
    cfg = load_config(args.config)
    svm = {k[4:]: v for k, v in vars(args).items() if k.startswith("svm_") and v is not None}
    if svm:
        cfg = cfg.merged({"svm": svm}).validate()
    log.info("resolved config: %s", json.dumps(cfg.to_dict(), sort_keys=True))
    return cfg


def _cmd_synth(args, cfg):
    from .synth import synth_dataset

    m = synth_dataset(args.out, args.subjects, args.genuine, args.forgeries, args.seed, args.enroll)
    n = sum(len(s.genuine) + len(s.forgery) for s in m.subjects)
    print(f"wrote {n} images and {args.out / 'manifest.json'}")


def _cmd_preprocess(args, cfg):
    from .imaging import preprocess, read_image, write_image

    views = preprocess(read_image(args.image), cfg.preprocess)
    stem = args.image.stem
    for name in ("gray", "binary", "thinned", "hpr"):
        path = args.out / f"{stem}_{name}.{args.format}"
        write_image(getattr(views, name), path)
        print(path)


def _cmd_extract(args, cfg):
    from .features import to_csv_string
    from .pipeline import features_for
    from .synth import load_manifest

    rows = [(args.label, features_for(p, cfg)) for p in args.images]
    if args.manifest:
        m = load_manifest(args.manifest)
        for s in m.subjects:
            rows += [(s.subject, features_for(m.path(f), cfg)) for f in s.genuine]
    if not rows:
        raise SigidError("nothing to extract: give images or --manifest")
    text = to_csv_string(rows)
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _cmd_enroll(args, cfg):
    from .identification import enroll
    from .pipeline import features_for
    from .synth import load_manifest

    m = load_manifest(args.manifest)
    templates = {s.subject: [features_for(m.path(f), cfg) for f in s.enroll] for s in m.subjects}
    persist(enroll(templates, cfg.matcher), args.out)
    print(f"enrolled {len(templates)} subjects -> {args.out}")


def _cmd_train(args, cfg):
    from .pipeline import features_for, fit
    from .synth import load_manifest

    m = load_manifest(args.manifest)
    templates = {s.subject: [features_for(m.path(f), cfg) for f in s.enroll] for s in m.subjects}
    _, model = fit(templates, cfg)
    persist(model, args.out)
    print(f"trained SVM with {len(model.alphas)} support vectors -> {args.out}")


def _cmd_identify(args, cfg):
    from .identification import score_query
    from .pipeline import features_for

    gallery = load(args.gallery, expect="gallery")
    model = load(args.model, expect="svm_model")
    q = features_for(args.image, cfg)
    ranked = score_query(gallery, model, q).ranked("fused")[:args.top]
    if args.json:
        print(json.dumps([{"rank": i + 1, "subject": s, "score": f} for i, (s, f) in enumerate(ranked)]))
    else:
        for i, (s, f) in enumerate(ranked, start=1):
            print(f"{i:4d}  {s}  {f:+.6f}")


def _cmd_evaluate(args, cfg):
    from .identification import cmc_csv, cmc_svg
    from .pipeline import run_evaluation
    from .synth import load_manifest

    report, gallery, model = run_evaluation(load_manifest(args.manifest), cfg)
    out = args.out
    persist(report, out / "report.json")
    persist(gallery, out / "gallery.json")
    persist(model, out / "model.json")
    persist(cfg, out / "config.json")
    atomic_write_text(out / "cmc.csv", cmc_csv(report))
    atomic_write_text(out / "cmc.svg", cmc_svg(report))
    for m, r in report.rank1.items():
        print(f"rank-1 {m:5s} {r * 100:6.2f}%")
    if report.forgery_rank1 is not None:
        print(f"forgeries ranked first for their target (fused): "
              f"{report.forgery_rank1['fused'] * 100:.2f}%")


COMMANDS = {
    "synth": _cmd_synth, "preprocess": _cmd_preprocess, "extract": _cmd_extract,
    "enroll": _cmd_enroll, "train": _cmd_train, "identify": _cmd_identify,
    "evaluate": _cmd_evaluate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.info("kernel backend: %s", _backend.BACKEND)
    try:
        cfg = _resolve_config(args)
        COMMANDS[args.command](args, cfg)
    except (SigidError, ValueError) as exc:
        print(f"sigid {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
