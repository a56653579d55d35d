"""Raster types and the preprocessing chain that turns a scan into four views.

Pipeline: nearest-neighbour height normalization, median then mean denoise,
Otsu binarization, Zhang-Suen thinning and the high-pressure-region mask.
Gray convention: 0 is the darkest ink, 255 white paper.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from . import _backend
from .errors import BadWindow, EmptyImage, EmptySignature, ParseError

MIN_INK_PIXELS = 10
_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class GrayImage:
    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if px.ndim != 2:
            raise ValueError(f"expected a 2-D raster, got shape {px.shape}")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other):
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True, eq=False)
class BinaryImage:
    ink: np.ndarray  # (height, width) bool, True = ink

    def __post_init__(self):
        ink = np.ascontiguousarray(self.ink, dtype=bool)
        if ink.ndim != 2:
            raise ValueError(f"expected a 2-D mask, got shape {ink.shape}")
        ink.setflags(write=False)
        object.__setattr__(self, "ink", ink)

    @property
    def height(self) -> int:
        return self.ink.shape[0]

    @property
    def width(self) -> int:
        return self.ink.shape[1]

    @property
    def count(self) -> int:
        return int(self.ink.sum())

    def __eq__(self, other):
        return isinstance(other, BinaryImage) and np.array_equal(self.ink, other.ink)


@dataclass(frozen=True)
class SignatureViews:
    gray: GrayImage
    binary: BinaryImage
    thinned: BinaryImage
    hpr: BinaryImage

    def __post_init__(self):
        shapes = {v.pixels.shape if isinstance(v, GrayImage) else v.ink.shape
                  for v in (self.gray, self.binary, self.thinned, self.hpr)}
        if len(shapes) != 1:
            raise ValueError(f"views disagree on dimensions: {sorted(shapes)}")

    @property
    def shape(self):
        return self.gray.pixels.shape


@dataclass(frozen=True)
class PreprocessConfig:
    target_height: int = 128
    median_window: int = 3
    mean_window: int = 3
    hpr_factor: float = 0.75

    def validate(self):
        if self.target_height < 8:
            raise ValueError("target_height must be >= 8")
        for w in (self.median_window, self.mean_window):
            _check_window(w)
        if not 0.0 < self.hpr_factor < 1.0:
            raise ValueError("hpr_factor must lie in (0, 1)")


def _check_window(window):
    if window < 3 or window % 2 == 0:
        raise BadWindow(f"window must be odd and >= 3, got {window}")


def normalize_geometry(img: GrayImage, target_height: int = 128) -> GrayImage:
    """Resize to ``target_height`` rows, nearest neighbour, keeping aspect ratio."""
    h, w = img.pixels.shape
    if h == 0 or w == 0:
        raise EmptyImage("image has zero width or height")
    if target_height < 1:
        raise ValueError("target_height must be >= 1")
    out_w = max(1, (2 * w * target_height + h) // (2 * h))
    # sample at output pixel centres
    rows = np.minimum((2 * np.arange(target_height) + 1) * h // (2 * target_height), h - 1)
    cols = np.minimum((2 * np.arange(out_w) + 1) * w // (2 * out_w), w - 1)
    return GrayImage(img.pixels[np.ix_(rows, cols)])


def denoise(img: GrayImage, kind: str = "median", window: int = 3) -> GrayImage:
    _check_window(window)
    half = window // 2
    padded = np.pad(img.pixels, half, mode="edge")
    win = sliding_window_view(padded, (window, window))
    if kind == "median":
        out = np.median(win, axis=(-2, -1))
    elif kind == "mean":
        # integer box sum, then round half up
        total = win.sum(axis=(-2, -1), dtype=np.int64)
        n = window * window
        out = (2 * total + n) // (2 * n)
    else:
        raise ValueError(f"unknown filter kind {kind!r}")
    return GrayImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def otsu_threshold(pixels: np.ndarray) -> int:
    """Otsu threshold T on the 256-bin histogram; ink is ``value <= T``.

    Returns -1 when the image holds a single gray level (nothing to separate).
    Among thresholds tied for the maximum between-class variance, the middle
    of the first tied run is returned; every threshold in that run yields the
    same partition.
    """
    hist = np.bincount(np.asarray(pixels, dtype=np.uint8).ravel(), minlength=256).astype(np.float64)
    levels = np.arange(256, dtype=np.float64)
    n = hist.sum()
    w0 = np.cumsum(hist)
    s0 = np.cumsum(hist * levels)
    w1 = n - w0
    total = s0[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (total * w0 - n * s0) ** 2 / (w0 * w1)
    between[(w0 == 0) | (w1 == 0)] = -1.0
    best = between.max()
    if best <= 0:
        return -1
    tied = between >= best * (1 - 1e-12)
    first = int(np.argmax(tied))
    last = first
    while last + 1 < 256 and tied[last + 1]:
        last += 1
    return (first + last) // 2


def binarize(img: GrayImage) -> BinaryImage:
    t = otsu_threshold(img.pixels)
    return BinaryImage(img.pixels <= t)


def thin(bin: BinaryImage) -> BinaryImage:
    """One-pixel-wide skeleton by Zhang-Suen iterative thinning.

    Zhang-Suen erases some tiny components outright (a 2x2 block, for one);
    each component that vanishes keeps its pixel nearest the centroid so
    that no stroke fragment disappears from the skeleton.
    """
    src = bin.ink
    if not src.any():
        return BinaryImage(np.zeros_like(src))
    padded = np.pad(src.astype(np.uint8), 1)
    out = _backend.zhang_suen(padded)[1:-1, 1:-1].astype(bool)
    labels, n = ndimage.label(src, structure=_EIGHT)
    survivors = np.unique(labels[out])  # thinning only deletes, so all > 0
    if survivors.size < n:
        kept = np.zeros(n + 1, dtype=bool)
        kept[survivors] = True
        for lab in np.flatnonzero(~kept[1:]) + 1:
            rr, cc = np.nonzero(labels == lab)
            d = (rr - rr.mean()) ** 2 + (cc - cc.mean()) ** 2
            k = int(np.argmin(d))
            out[rr[k], cc[k]] = True
    return BinaryImage(out)


def extract_hpr(gray: GrayImage, factor: float = 0.75) -> BinaryImage:
    """High-pressure region: the darkest share of the ink.

    With g_min/g_max taken over the Otsu ink pixels, a pixel is kept when
    ``value <= g_min + (1 - factor) * (g_max - g_min)``.
    """
    if not 0.0 < factor < 1.0:
        raise ValueError("factor must lie in (0, 1)")
    px = gray.pixels
    t = otsu_threshold(px)
    candidates = px[px <= t]
    if candidates.size == 0:
        return BinaryImage(np.zeros(px.shape, dtype=bool))
    g_min = float(candidates.min())
    g_max = float(candidates.max())
    if g_min == g_max:
        return BinaryImage(np.zeros(px.shape, dtype=bool))
    cut = g_min + (1.0 - factor) * (g_max - g_min)
    return BinaryImage(px <= cut)


def preprocess(raw: GrayImage, cfg: PreprocessConfig | None = None) -> SignatureViews:
    cfg = cfg or PreprocessConfig()
    cfg.validate()
    gray = normalize_geometry(raw, cfg.target_height)
    gray = denoise(gray, "median", cfg.median_window)
    gray = denoise(gray, "mean", cfg.mean_window)
    binary = binarize(gray)
    if binary.count < MIN_INK_PIXELS:
        raise EmptySignature(
            f"only {binary.count} ink pixels after binarization (need {MIN_INK_PIXELS})"
        )
    return SignatureViews(gray=gray, binary=binary, thinned=thin(binary),
                          hpr=extract_hpr(gray, cfg.hpr_factor))


# ---------------------------------------------------------------------------
# file I/O

def _pgm_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise ParseError("truncated PGM header", field="header")
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos + 1  # one whitespace byte separates header and raster


def decode_pgm(data: bytes) -> GrayImage:
    (magic, w, h, maxval), offset = _pgm_tokens(data, 4)
    if magic != b"P5":
        raise ParseError(f"not a binary PGM (magic {magic!r})", field="magic")
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise ParseError(f"bad PGM header: {exc}", field="header") from None
    if w <= 0 or h <= 0:
        raise EmptyImage("PGM has zero width or height")
    if not 0 < maxval < 65536:
        raise ParseError(f"maxval {maxval} out of range", field="maxval")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    need = w * h * dtype.itemsize
    body = data[offset:offset + need]
    if len(body) < need:
        raise ParseError(f"PGM raster truncated: {len(body)} of {need} bytes", field="raster")
    px = np.frombuffer(body, dtype=dtype).reshape(h, w).astype(np.float64)
    if maxval != 255:
        px = np.rint(px * 255.0 / maxval)
    return GrayImage(px.astype(np.uint8))


def encode_pgm(img: GrayImage) -> bytes:
    return f"P5\n{img.width} {img.height}\n255\n".encode("ascii") + img.pixels.tobytes()


def as_gray(view) -> GrayImage:
    """Render a BinaryImage as black ink on white for inspection."""
    if isinstance(view, GrayImage):
        return view
    return GrayImage(np.where(view.ink, 0, 255).astype(np.uint8))


def read_image(path) -> GrayImage:
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"P5":
        return decode_pgm(data)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        from PIL import Image

        with Image.open(path) as im:
            if im.mode not in ("L", "1", "P", "I;16"):
                raise ParseError(f"PNG mode {im.mode} is not grayscale", field="mode")
            return GrayImage(np.asarray(im.convert("L")))
    raise ParseError(f"{path}: unsupported image format (PGM P5 or grayscale PNG)")


def write_image(img, path) -> None:
    from .persist import atomic_write_bytes

    gray = as_gray(img)
    path = Path(path)
    if path.suffix.lower() == ".png":
        import io

        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray(gray.pixels, mode="L").save(buf, format="PNG")
        atomic_write_bytes(path, buf.getvalue())
    else:
        atomic_write_bytes(path, encode_pgm(gray))
