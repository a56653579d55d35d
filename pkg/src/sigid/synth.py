"""Deterministic synthetic signature corpus.

Each subject owns a parametric pen path: a chain of cubic Bezier segments
with a slant, a stroke radius and a pen-pressure profile. Genuine samples
jitter those parameters slightly; a skilled forgery is produced by another
subject copying the target's path with coarser jitter and the forger's own
pen habits (radius and pressure).

Randomness: numpy PCG64 streams keyed by ``(seed, subject, kind, sample)``,
so any single file can be regenerated without replaying the rest.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import IoFailure, ParseError, SchemaVersionMismatch
from .imaging import GrayImage, encode_pgm

MANIFEST_FORMAT = "sigid.manifest"
MANIFEST_VERSION = 1
_GENUINE, _FORGERY, _STYLE = 1, 2, 0


@dataclass(frozen=True)
class SynthParams:
    canvas_width: int = 420
    canvas_height: int = 180
    min_segments: int = 4
    max_segments: int = 7
    genuine_jitter: float = 4.0    # px, control-point noise
    forgery_jitter: float = 9.0
    pressure_jitter: float = 8.0   # gray levels
    affine_jitter: float = 0.03    # relative scale / shear noise
    shift_jitter: float = 4.0      # px
    noise_sigma: float = 3.0
    salt_pepper: float = 0.002


@dataclass(frozen=True)
class SubjectEntry:
    subject: str
    genuine: tuple
    forgery: tuple
    enroll: tuple
    test: tuple


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    subjects: tuple
    seed: int
    n_enroll: int
    params: SynthParams = field(default_factory=SynthParams)

    def path(self, rel) -> Path:
        return self.root / rel

    def to_dict(self):
        return {
            "format": MANIFEST_FORMAT,
            "version": MANIFEST_VERSION,
            "seed": self.seed,
            "n_enroll": self.n_enroll,
            "generator": asdict(self.params),
            "subjects": [
                {"id": s.subject, "genuine": list(s.genuine), "forgery": list(s.forgery),
                 "enroll": list(s.enroll), "test": list(s.test)}
                for s in self.subjects
            ],
        }

    def validate(self):
        """Every listed file exists and enrollment and test sets are disjoint."""
        for s in self.subjects:
            if set(s.enroll) & set(s.test):
                raise ParseError(f"subject {s.subject}: enrollment and test overlap", field="split")
            if len(s.enroll) != self.n_enroll:
                raise ParseError(f"subject {s.subject}: {len(s.enroll)} enrollment files, "
                                 f"expected {self.n_enroll}", field="enroll")
            for rel in (*s.genuine, *s.forgery):
                if not self.path(rel).is_file():
                    raise IoFailure(f"manifest lists missing file {rel}")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read manifest {path}: {exc.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest {path}: {exc.msg}", line=exc.lineno) from None
    if d.get("format") != MANIFEST_FORMAT:
        raise ParseError(f"{path} is not a dataset manifest", field="format")
    if d.get("version") != MANIFEST_VERSION:
        raise SchemaVersionMismatch("manifest", d.get("version"), MANIFEST_VERSION)
    try:
        subjects = tuple(
            SubjectEntry(s["id"], tuple(s["genuine"]), tuple(s["forgery"]),
                         tuple(s["enroll"]), tuple(s["test"]))
            for s in d["subjects"]
        )
        return DatasetManifest(root=path.parent, subjects=subjects, seed=d["seed"],
                               n_enroll=d["n_enroll"], params=SynthParams(**d["generator"]))
    except KeyError as exc:
        raise ParseError(f"manifest {path} lacks a required key", field=exc.args[0]) from None


# ---------------------------------------------------------------------------
# stroke model

@dataclass(frozen=True)
class Style:
    controls: np.ndarray   # (3 * n_segments + 1, 2) Bezier control polygon
    slant: float
    radius: float
    ink_level: float       # mean gray of the stroke
    pressure_amp: float
    pressure_freq: float
    pressure_phase: float
    dot: np.ndarray        # (2,) position of a detached dot/flourish


def _rng(seed, *key):
    return np.random.default_rng([seed, *key])


def subject_style(seed: int, index: int, p: SynthParams) -> Style:
    rng = _rng(seed, index, _STYLE)
    n_seg = int(rng.integers(p.min_segments, p.max_segments + 1))
    n_pts = 3 * n_seg + 1
    margin_x = 0.12 * p.canvas_width
    xs = np.sort(rng.uniform(margin_x, p.canvas_width - margin_x, n_pts))
    # occasional backward loops
    loops = rng.random(n_pts) < 0.25
    xs = xs - loops * rng.uniform(10, 40, n_pts)
    mid = p.canvas_height * rng.uniform(0.45, 0.6)
    amp = p.canvas_height * rng.uniform(0.18, 0.32)
    ys = mid + amp * rng.uniform(-1, 1, n_pts)
    dot = np.array([rng.uniform(margin_x, p.canvas_width - margin_x),
                    p.canvas_height * rng.uniform(0.12, 0.25)])
    return Style(
        controls=np.column_stack([xs, ys]),
        slant=float(rng.uniform(-0.35, 0.35)),
        radius=float(rng.uniform(1.6, 3.4)),
        ink_level=float(rng.uniform(35, 95)),
        pressure_amp=float(rng.uniform(10, 40)),
        pressure_freq=float(rng.uniform(1.0, 4.0)),
        pressure_phase=float(rng.uniform(0, 2 * np.pi)),
        dot=dot,
    )


def _bezier_path(controls, step=0.5):
    pts = []
    for s in range(0, len(controls) - 1, 3):
        p0, p1, p2, p3 = controls[s:s + 4]
        length = (np.linalg.norm(p1 - p0) + np.linalg.norm(p2 - p1) + np.linalg.norm(p3 - p2))
        t = np.linspace(0.0, 1.0, max(2, int(length / step)))[:, None]
        u = 1 - t
        pts.append(u ** 3 * p0 + 3 * u * u * t * p1 + 3 * u * t * t * p2 + t ** 3 * p3)
    return np.vstack(pts)


def _perturb(style: Style, rng, jitter, p: SynthParams) -> Style:
    ctrl = style.controls + rng.normal(0, jitter, style.controls.shape)
    return Style(
        controls=ctrl,
        slant=style.slant + rng.normal(0, p.affine_jitter),
        radius=style.radius * float(np.exp(rng.normal(0, 0.08))),
        ink_level=style.ink_level + rng.normal(0, p.pressure_jitter),
        pressure_amp=style.pressure_amp * float(np.exp(rng.normal(0, 0.1))),
        pressure_freq=style.pressure_freq,
        pressure_phase=style.pressure_phase + rng.normal(0, 0.2),
        dot=style.dot + rng.normal(0, jitter, 2),
    )


def render(style: Style, rng, p: SynthParams) -> GrayImage:
    """Rasterize a pen path: distance-to-path sets coverage, path position sets darkness."""
    h, w = p.canvas_height, p.canvas_width
    path = _bezier_path(style.controls)
    # slant and a small global affine, about the canvas centre
    scale = 1.0 + rng.normal(0, p.affine_jitter)
    cx, cy = w / 2, h / 2
    shift = rng.normal(0, p.shift_jitter, 2)
    x = (path[:, 0] - cx) * scale + style.slant * (cy - path[:, 1]) + cx + shift[0]
    y = (path[:, 1] - cy) * scale + cy + shift[1]
    t = np.linspace(0, 1, len(path))
    darkness = style.ink_level + style.pressure_amp * np.sin(
        2 * np.pi * style.pressure_freq * t + style.pressure_phase)
    dot_xy = (style.dot - [cx, cy]) * scale + [cx, cy] + shift
    dot_pts = dot_xy + np.array([[dx, 0.0] for dx in np.linspace(-6, 6, 25)])
    x = np.concatenate([x, dot_pts[:, 0]])
    y = np.concatenate([y, dot_pts[:, 1]])
    darkness = np.concatenate([darkness, np.full(len(dot_pts), style.ink_level)])

    xi = np.clip(np.rint(x).astype(int), 0, w - 1)
    yi = np.clip(np.rint(y).astype(int), 0, h - 1)
    seed_mask = np.ones((h, w), dtype=bool)
    level = np.full((h, w), 255.0)
    # later path samples overwrite earlier ones on the same pixel
    seed_mask[yi, xi] = False
    level[yi, xi] = darkness
    dist, (iy, ix) = ndimage.distance_transform_edt(seed_mask, return_indices=True)
    ink = np.clip(level[iy, ix], 0, 200)
    coverage = np.clip(style.radius + 0.5 - dist, 0.0, 1.0)
    paper = 238.0 + rng.normal(0, p.noise_sigma, (h, w))
    img = paper * (1 - coverage) + ink * coverage
    flips = rng.random((h, w))
    img[flips < p.salt_pepper / 2] = 0
    img[flips > 1 - p.salt_pepper / 2] = 255
    return GrayImage(np.clip(np.rint(img), 0, 255).astype(np.uint8))


def genuine_image(seed, subject_index, sample, p: SynthParams) -> GrayImage:
    style = subject_style(seed, subject_index, p)
    rng = _rng(seed, subject_index, _GENUINE, sample)
    return render(_perturb(style, rng, p.genuine_jitter, p), rng, p)


def forgery_image(seed, target_index, forger_index, sample, p: SynthParams) -> GrayImage:
    target = subject_style(seed, target_index, p)
    forger = subject_style(seed, forger_index, p)
    rng = _rng(seed, target_index, _FORGERY, sample)
    copied = _perturb(target, rng, p.forgery_jitter, p)
    # the forger's hand: own stroke width and pressure habits
    copied = Style(copied.controls, copied.slant + rng.normal(0, 0.05), forger.radius,
                   forger.ink_level, forger.pressure_amp, forger.pressure_freq,
                   forger.pressure_phase, copied.dot)
    return render(copied, rng, p)


def synth_dataset(root, n_subjects: int = 40, genuine_per_subject: int = 9,
                  forgers_per_subject: int = 3, seed: int = 42, n_enroll: int = 6,
                  params: SynthParams | None = None) -> DatasetManifest:
    """Render the corpus under ``root`` and write ``manifest.json`` beside it."""
    from .persist import atomic_write_bytes, atomic_write_text

    if n_subjects < 1 or genuine_per_subject < 1 or forgers_per_subject < 0:
        raise ValueError("subject and sample counts must be >= 1")
    if not 0 < n_enroll <= genuine_per_subject:
        raise ValueError("n_enroll must lie in [1, genuine_per_subject]")
    p = params or SynthParams()
    root = Path(root)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {root}: {exc.strerror}") from None
    entries = []
    for i in range(n_subjects):
        sid = f"s{i:04d}"
        genuine, forgery = [], []
        for k in range(genuine_per_subject):
            rel = f"{sid}/genuine_{k:02d}.pgm"
            atomic_write_bytes(root / rel, encode_pgm(genuine_image(seed, i, k, p)))
            genuine.append(rel)
        for k in range(forgers_per_subject if n_subjects > 1 else 0):
            forger = (i + 1 + k) % n_subjects
            if forger == i:
                forger = (forger + 1) % n_subjects
            rel = f"{sid}/forgery_{k:02d}_by_s{forger:04d}.pgm"
            atomic_write_bytes(root / rel, encode_pgm(forgery_image(seed, i, forger, k, p)))
            forgery.append(rel)
        entries.append(SubjectEntry(sid, tuple(genuine), tuple(forgery),
                                    tuple(genuine[:n_enroll]), tuple(genuine[n_enroll:])))
    manifest = DatasetManifest(root=root, subjects=tuple(entries), seed=seed,
                               n_enroll=n_enroll, params=p)
    atomic_write_text(root / "manifest.json", json.dumps(manifest.to_dict(), indent=1) + "\n")
    return manifest
