import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from sigid.errors import BadWindow, EmptyImage, EmptySignature, ParseError
from sigid.imaging import (BinaryImage, GrayImage, PreprocessConfig, binarize, decode_pgm,
                           denoise, encode_pgm, extract_hpr, normalize_geometry,
                           otsu_threshold, preprocess, read_image, thin, write_image)

from conftest import stroke_image

EIGHT = np.ones((3, 3), dtype=bool)


def brute_force_otsu_variance(px):
    """Max between-class variance over all 256 thresholds, computed on the pixels."""
    px = px.ravel().astype(np.float64)
    best = 0.0
    for t in range(256):
        lo, hi = px[px <= t], px[px > t]
        if lo.size == 0 or hi.size == 0:
            continue
        w0, w1 = lo.size / px.size, hi.size / px.size
        best = max(best, w0 * w1 * (lo.mean() - hi.mean()) ** 2)
    return best


def class_variance(px, t):
    px = px.ravel().astype(np.float64)
    lo, hi = px[px <= t], px[px > t]
    if lo.size == 0 or hi.size == 0:
        return 0.0
    return lo.size * hi.size / px.size ** 2 * (lo.mean() - hi.mean()) ** 2


def zhang_suen_reference(mask):
    """Straight per-pixel transcription of Zhang-Suen, used as an oracle."""
    img = np.pad(mask.astype(int), 1)
    while True:
        changed = False
        for step in (0, 1):
            kill = []
            for r in range(1, img.shape[0] - 1):
                for c in range(1, img.shape[1] - 1):
                    if not img[r, c]:
                        continue
                    p = [img[r-1, c], img[r-1, c+1], img[r, c+1], img[r+1, c+1],
                         img[r+1, c], img[r+1, c-1], img[r, c-1], img[r-1, c-1]]
                    b = sum(p)
                    a = sum(p[i] == 0 and p[(i + 1) % 8] == 1 for i in range(8))
                    p2, p4, p6, p8 = p[0], p[2], p[4], p[6]
                    if step == 0:
                        side = p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
                    else:
                        side = p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0
                    if 2 <= b <= 6 and a == 1 and side:
                        kill.append((r, c))
            for r, c in kill:
                img[r, c] = 0
            changed |= bool(kill)
        if not changed:
            return img[1:-1, 1:-1].astype(bool)


blobs = st.builds(
    lambda seed, sigma, q: _blob(seed, sigma, q),
    st.integers(0, 10_000), st.floats(0.8, 3.0), st.floats(0.3, 0.85),
)


def _blob(seed, sigma, q):
    rng = np.random.default_rng(seed)
    f = ndimage.gaussian_filter(rng.random((32, 48)), sigma)
    return f > np.quantile(f, q)


# ---------------------------------------------------------------------------
# normalize_geometry

def test_normalize_keeps_aspect_ratio():
    out = normalize_geometry(GrayImage(np.zeros((300, 600), np.uint8)), 128)
    assert (out.width, out.height) == (256, 128)


def test_normalize_identity_at_target_size():
    px = np.random.default_rng(1).integers(0, 256, (128, 256), dtype=np.uint8)
    assert normalize_geometry(GrayImage(px), 128) == GrayImage(px)


def test_normalize_checkerboard_replicates_pixels():
    board = (np.indices((3, 3)).sum(axis=0) % 2 * 255).astype(np.uint8)
    out = normalize_geometry(GrayImage(board), 6)
    np.testing.assert_array_equal(out.pixels, np.kron(board, np.ones((2, 2), np.uint8)))


def test_normalize_rejects_empty():
    with pytest.raises(EmptyImage):
        normalize_geometry(GrayImage(np.zeros((0, 5), np.uint8)), 128)


@given(st.integers(1, 400), st.integers(1, 400), st.integers(8, 200))
def test_normalize_aspect_within_rounding(w, h, target):
    out = normalize_geometry(GrayImage(np.zeros((h, w), np.uint8)), target)
    assert out.height == target
    assert abs(out.width / out.height - w / h) <= 1 / out.height + 1e-12


# ---------------------------------------------------------------------------
# denoise

@pytest.mark.parametrize("kind", ["mean", "median"])
def test_denoise_constant_unchanged(kind):
    img = GrayImage(np.full((7, 9), 77, np.uint8))
    assert denoise(img, kind, 3) == img


def test_median_removes_isolated_pixel():
    px = np.zeros((5, 5), np.uint8)
    px[2, 2] = 255
    assert denoise(GrayImage(px), "median", 3).pixels[2, 2] == 0


def test_mean_of_zero_to_eight_is_four():
    px = np.zeros((5, 5), np.uint8)
    px[1:4, 1:4] = np.arange(9).reshape(3, 3)
    assert denoise(GrayImage(px), "mean", 3).pixels[2, 2] == 4


@pytest.mark.parametrize("window", [2, 1, 4])
def test_denoise_bad_window(window):
    with pytest.raises(BadWindow):
        denoise(GrayImage(np.zeros((5, 5), np.uint8)), "mean", window)


@pytest.mark.parametrize("px", [
    np.repeat(np.r_[np.zeros(6), np.full(6, 255)][None, :], 8, axis=0),   # step edge
    np.tile(np.arange(0, 240, 20), (8, 1)),                                # monotone ramp
])
def test_median_root_is_fixed_point(px):
    img = GrayImage(px.astype(np.uint8))
    assert denoise(img, "median", 3) == img


# ---------------------------------------------------------------------------
# binarize

def test_blank_page_has_no_ink():
    assert binarize(GrayImage(np.full((10, 10), 255, np.uint8))).count == 0


def test_bimodal_split():
    px = np.full((10, 10), 220, np.uint8)
    px[:, :5] = 30
    t = otsu_threshold(px)
    assert 30 < t < 220
    np.testing.assert_array_equal(binarize(GrayImage(px)).ink, px == 30)


def test_single_dark_pixel_is_ink():
    px = np.full((4, 4), 255, np.uint8)
    px[1, 2] = 0
    ink = binarize(GrayImage(px)).ink
    assert ink[1, 2] and ink.sum() == 1


@given(st.integers(0, 255), st.integers(1, 20), st.integers(1, 20))
def test_constant_image_has_no_ink(v, h, w):
    assert binarize(GrayImage(np.full((h, w), v, np.uint8))).count == 0


def test_otsu_matches_exhaustive_scan():
    rng = np.random.default_rng(3)
    for _ in range(10):
        px = rng.integers(0, 256, 500).astype(np.uint8)
        t = otsu_threshold(px)
        assert class_variance(px, t) == pytest.approx(brute_force_otsu_variance(px), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(2, 12), st.integers(2, 12))))
def test_binarize_partitions_at_threshold(px):
    t = otsu_threshold(px)
    ink = binarize(GrayImage(px)).ink
    np.testing.assert_array_equal(ink, px <= t)


# ---------------------------------------------------------------------------
# thin

def test_thin_empty():
    assert thin(BinaryImage(np.zeros((6, 6), bool))).count == 0


def test_thin_keeps_diagonal_line():
    line = np.eye(12, dtype=bool)
    assert thin(BinaryImage(line)) == BinaryImage(line)


def test_thin_bar_to_axis_line():
    bar = np.zeros((7, 26), bool)
    bar[2:5, 3:23] = True
    out = thin(BinaryImage(bar)).ink
    np.testing.assert_array_equal(out, zhang_suen_reference(bar))
    rows = np.flatnonzero(out.any(axis=1))
    assert rows.tolist() == [3]  # the bar's middle row
    cols = np.flatnonzero(out[3])
    assert cols.size > 10 and np.all(np.diff(cols) == 1)


def test_thin_keeps_tiny_component():
    sq = np.zeros((6, 6), bool)
    sq[2:4, 2:4] = True
    assert thin(BinaryImage(sq)).count == 1


@settings(max_examples=25, deadline=None)
@given(blobs)
def test_thin_matches_reference_and_is_idempotent(mask):
    out = thin(BinaryImage(mask))
    ref = zhang_suen_reference(mask)
    # the reference may drop whole tiny components; everywhere else it must agree
    assert np.all(out.ink[ref]) and np.all(ref[out.ink] | _restored(mask, ref, out.ink))
    assert thin(out) == out


def _restored(mask, ref, out):
    labels, _ = ndimage.label(mask, EIGHT)
    lost = np.setdiff1d(np.unique(labels[mask]), np.unique(labels[ref]))
    return np.isin(labels, lost)[out]


@settings(max_examples=40, deadline=None)
@given(blobs)
def test_thin_preserves_components_and_stays_near_ink(mask):
    out = thin(BinaryImage(mask)).ink
    assert ndimage.label(out, EIGHT)[1] == ndimage.label(mask, EIGHT)[1]
    assert not np.any(out & ~ndimage.binary_dilation(mask, EIGHT))


# ---------------------------------------------------------------------------
# extract_hpr

def test_hpr_constant_is_empty():
    assert extract_hpr(GrayImage(np.full((8, 8), 90, np.uint8)), 0.75).count == 0


def test_hpr_threshold_formula():
    # ink at 0 / 50 / 51 / 200 on white: Otsu puts all of it on the ink side,
    # so g_min = 0, g_max = 200 and factor 0.75 keeps values <= 50
    px = np.full((40, 40), 255, np.uint8)
    vals = np.r_[np.zeros(10), np.full(5, 50), np.full(5, 51), np.full(300, 200)]
    px.flat[:vals.size] = vals.astype(np.uint8)
    assert otsu_threshold(px) >= 200
    out = extract_hpr(GrayImage(px), 0.75)
    np.testing.assert_array_equal(out.ink, px <= 50)


def test_hpr_monotone_in_factor():
    g = GrayImage(stroke_image())
    sizes = [extract_hpr(g, f).count for f in (0.85, 0.75, 0.55)]
    assert sizes[0] <= sizes[1] <= sizes[2]
    assert sizes[2] > 0


# ---------------------------------------------------------------------------
# preprocess

def test_blank_scan_is_rejected():
    with pytest.raises(EmptySignature):
        preprocess(GrayImage(np.full((100, 200), 240, np.uint8)))


def test_views_share_shape_and_skeleton_stays_in_ink():
    v = preprocess(GrayImage(stroke_image()))
    assert v.gray.height == 128
    assert {v.binary.ink.shape, v.thinned.ink.shape, v.hpr.ink.shape} == {v.gray.pixels.shape}
    halo = ndimage.binary_dilation(v.binary.ink, EIGHT)
    assert not np.any(v.thinned.ink & ~halo)
    assert v.thinned.count < v.binary.count


def test_preprocess_binary_stable_on_own_gray():
    # a smooth convex blob survives a second median+mean pass unchanged
    yy, xx = np.mgrid[0:128, 0:256]
    px = np.where(np.hypot((xx - 128) / 80, (yy - 64) / 40) < 1, 50, 235).astype(np.uint8)
    v1 = preprocess(GrayImage(px))
    v2 = preprocess(v1.gray)
    assert v2.binary == v1.binary


def test_preprocess_config_validation():
    with pytest.raises(BadWindow):
        preprocess(GrayImage(stroke_image()), PreprocessConfig(median_window=4))


# ---------------------------------------------------------------------------
# PGM I/O

def test_pgm_round_trip(tmp_path):
    img = GrayImage(np.random.default_rng(0).integers(0, 256, (13, 17), dtype=np.uint8))
    write_image(img, tmp_path / "a.pgm")
    assert read_image(tmp_path / "a.pgm") == img


def test_pgm_header_comments_and_16_bit():
    data = b"P5\n# scanner\n2 1\n65535\n" + np.array([0, 65535], ">u2").tobytes()
    np.testing.assert_array_equal(decode_pgm(data).pixels, [[0, 255]])


def test_pgm_truncated_raises_parse_error():
    data = encode_pgm(GrayImage(np.zeros((4, 4), np.uint8)))
    with pytest.raises(ParseError):
        decode_pgm(data[:-3])


def test_png_round_trip(tmp_path):
    pytest.importorskip("PIL")
    img = GrayImage(np.arange(64, dtype=np.uint8).reshape(8, 8) * 3)
    write_image(img, tmp_path / "a.png")
    assert read_image(tmp_path / "a.png") == img
