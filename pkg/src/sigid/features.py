"""Geometric global and 5x5-grid local features, 173 values per signature."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import BadWindow, DimensionMismatch, EmptySignature, NoInk, SchemaMismatch
from .imaging import MIN_INK_PIXELS, BinaryImage, SignatureViews

SCHEMA_ID = "sigid-geometric-173/v1"
N_GLOBAL = 23
GRID = 5
PER_CELL = 6

GLOBAL_NAMES = (
    "width", "height", "aspect_ratio",
    "hproj_support_binary", "hproj_support_thinned",
    "vproj_support_binary", "vproj_support_thinned",
    "area_binary", "area_thinned", "area_hpr",
    "narea_binary", "narea_thinned", "narea_hpr",
    "cog_x", "cog_y",
    "vproj_smooth_max", "vproj_smooth_min",
    "hproj_smooth_max", "hproj_smooth_min",
    "global_baseline", "upper_edge_limit", "lower_edge_limit", "middle_zone",
)
CELL_NAMES = ("area_binary", "narea_binary", "cog_x_rel", "cog_y_rel",
              "area_thinned", "area_hpr")
LOCAL_NAMES = tuple(f"cell{c:02d}_{name}" for c in range(GRID * GRID) for name in CELL_NAMES)
FEATURE_NAMES = GLOBAL_NAMES + LOCAL_NAMES
N_FEATURES = len(FEATURE_NAMES)
INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}

assert N_FEATURES == 173 and len(INDEX) == N_FEATURES


@dataclass(frozen=True)
class FeatureConfig:
    extent_min_count: int = 3
    smooth_window: int = 5
    edge_window: int = 3

    def validate(self):
        for w in (self.smooth_window, self.edge_window):
            if w < 3 or w % 2 == 0:
                raise BadWindow(f"window must be odd and >= 3, got {w}")
        if self.extent_min_count < 0:
            raise ValueError("extent_min_count must be >= 0")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    schema_id: str = SCHEMA_ID

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (N_FEATURES,):
            raise DimensionMismatch(f"feature vector must have {N_FEATURES} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature vector contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        return (isinstance(other, FeatureVector) and self.schema_id == other.schema_id
                and np.array_equal(self.values, other.values))

    def __getitem__(self, name):
        return float(self.values[INDEX[name]])

    def to_dict(self):
        return {"schema_id": self.schema_id,
                "features": {n: float(x) for n, x in zip(FEATURE_NAMES, self.values)}}

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_id") != SCHEMA_ID:
            raise SchemaMismatch(f"feature schema {d.get('schema_id')!r} != {SCHEMA_ID!r}")
        feats = d["features"]
        return cls(np.array([feats[n] for n in FEATURE_NAMES], dtype=np.float64))

    def to_json(self):
        return json.dumps(self.to_dict())


# ---------------------------------------------------------------------------
# projections

def projection(bin: BinaryImage, axis: str) -> np.ndarray:
    """Ink count per row (``"horizontal"``) or per column (``"vertical"``)."""
    if axis == "horizontal":
        return bin.ink.sum(axis=1, dtype=np.int64)
    if axis == "vertical":
        return bin.ink.sum(axis=0, dtype=np.int64)
    raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")


def smooth(counts, window: int = 3) -> np.ndarray:
    """Moving average with edge replication, rounded half up to whole counts."""
    if window < 3 or window % 2 == 0:
        raise BadWindow(f"window must be odd and >= 3, got {window}")
    counts = np.asarray(counts, dtype=np.int64)
    half = window // 2
    padded = np.pad(counts, half, mode="edge")
    sums = np.convolve(padded, np.ones(window, dtype=np.int64), mode="valid")
    return (2 * sums + window) // (2 * window)


def ink_extent(counts, min_count: int = 3):
    """First/last bin holding more than ``min_count`` pixels and the span."""
    idx = np.flatnonzero(np.asarray(counts) > min_count)
    if idx.size == 0:
        return 0, 0, 0
    lo, hi = int(idx[0]), int(idx[-1])
    return lo, hi, hi - lo + 1


def center_of_gravity(bin: BinaryImage):
    rr, cc = np.nonzero(bin.ink)
    if rr.size == 0:
        raise NoInk("center of gravity of an empty image")
    return float(cc.mean()), float(rr.mean())


def global_baseline(bin: BinaryImage) -> int:
    """Row holding the median ink pixel in row order (lower median)."""
    rows = projection(bin, "horizontal")
    n = int(rows.sum())
    if n == 0:
        raise NoInk("baseline of an empty image")
    return int(np.searchsorted(np.cumsum(rows), (n + 1) // 2))


def edge_limits(bin: BinaryImage, window: int = 3):
    """Outermost rows above/below the baseline where smoothing alters the profile."""
    h = projection(bin, "horizontal")
    b = global_baseline(bin)
    moved = np.flatnonzero(smooth(h, window) != h)
    above = moved[moved < b]
    below = moved[moved > b]
    upper = int(above[0]) if above.size else b
    lower = int(below[-1]) if below.size else b
    return upper, lower, lower - upper


# ---------------------------------------------------------------------------
# feature groups

def _require_ink(v: SignatureViews):
    if v.binary.count < MIN_INK_PIXELS:
        raise EmptySignature(f"binary view has {v.binary.count} ink pixels")


def _support(counts) -> int:
    return int(np.count_nonzero(counts))


def _smoothed_extremes(counts, window, min_count):
    s = smooth(counts, window)
    lo, hi, span = ink_extent(counts, min_count)
    inside = s[lo:hi + 1] if span else s
    return float(s.max()), float(inside.min())


def global_features(v: SignatureViews, cfg: FeatureConfig | None = None) -> np.ndarray:
    cfg = cfg or FeatureConfig()
    _require_ink(v)
    hb, vb = projection(v.binary, "horizontal"), projection(v.binary, "vertical")
    ht, vt = projection(v.thinned, "horizontal"), projection(v.thinned, "vertical")
    width = ink_extent(vb, cfg.extent_min_count)[2]
    height = ink_extent(hb, cfg.extent_min_count)[2]
    box = width * height
    areas = [v.binary.count, v.thinned.count, v.hpr.count]
    # ink outside the >min_count extent can push the ratio past 1
    nareas = [min(1.0, a / box) if box else 0.0 for a in areas]
    cog_x, cog_y = center_of_gravity(v.binary)
    vmax, vmin = _smoothed_extremes(vb, cfg.smooth_window, cfg.extent_min_count)
    hmax, hmin = _smoothed_extremes(hb, cfg.smooth_window, cfg.extent_min_count)
    upper, lower, middle = edge_limits(v.binary, cfg.edge_window)
    out = np.array([
        width, height, width / height if height else 0.0,
        _support(hb), _support(ht), _support(vb), _support(vt),
        *areas, *nareas,
        cog_x, cog_y,
        vmax, vmin, hmax, hmin,
        global_baseline(v.binary), upper, lower, middle,
    ], dtype=np.float64)
    assert out.shape == (N_GLOBAL,)
    return out


def grid_bounds(size: int, parts: int = GRID):
    """Cell edges along one axis; the last cell takes the remainder."""
    step = size // parts
    edges = [i * step for i in range(parts)] + [size]
    return list(zip(edges[:-1], edges[1:]))


def local_features(v: SignatureViews) -> np.ndarray:
    _require_ink(v)
    h, w = v.shape
    out = np.empty(GRID * GRID * PER_CELL, dtype=np.float64)
    k = 0
    for r0, r1 in grid_bounds(h):
        for c0, c1 in grid_bounds(w):
            cell = v.binary.ink[r0:r1, c0:c1]
            ch, cw = cell.shape
            area = int(cell.sum())
            if area:
                rr, cc = np.nonzero(cell)
                cx, cy = float(cc.mean()), float(rr.mean())
            else:
                cx, cy = cw / 2, ch / 2
            out[k:k + PER_CELL] = (
                area,
                area / (ch * cw) if ch * cw else 0.0,
                cx, cy,
                int(v.thinned.ink[r0:r1, c0:c1].sum()),
                int(v.hpr.ink[r0:r1, c0:c1].sum()),
            )
            k += PER_CELL
    return out


def extract(v: SignatureViews, cfg: FeatureConfig | None = None) -> FeatureVector:
    return FeatureVector(np.concatenate([global_features(v, cfg), local_features(v)]))


# ---------------------------------------------------------------------------
# CSV

def csv_header():
    return ["subject"] + list(FEATURE_NAMES)


def write_csv(rows, fh) -> None:
    """``rows`` is an iterable of ``(label, FeatureVector)``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(csv_header())
    for label, fv in rows:
        w.writerow([label] + [repr(float(x)) for x in fv.values])


def read_csv(fh):
    from .errors import ParseError

    reader = csv.reader(fh)
    header = next(reader, None)
    if header != csv_header():
        raise ParseError("feature CSV header does not match the schema", line=1)
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != N_FEATURES + 1:
            raise ParseError(f"expected {N_FEATURES + 1} columns, got {len(row)}", line=lineno)
        try:
            vals = np.array([float(x) for x in row[1:]])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        rows.append((row[0], FeatureVector(vals)))
    return rows


def to_csv_string(rows) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()
