import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from asc.imagecore import (
    MalformedImageError, Pattern, ShapeError, UnreadableImageError, UnsupportedBitDepthError,
    apply_pattern, as_image, as_mask, dequantize, l0_norm, load_image, load_mask, mask_of,
    pixel_set, quantize, save_image, save_mask,
)

unit = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def image_and_pattern(draw):
    h, w = draw(st.integers(1, 12)), draw(st.integers(1, 12))
    x = draw(arrays(np.float64, (h, w, 3), elements=unit))
    m = draw(arrays(np.uint8, (h, w), elements=st.integers(0, 1)))
    t = draw(arrays(np.float64, (h, w, 3), elements=unit))
    return x, Pattern(m, t)


@given(image_and_pattern())
def test_apply_pattern_keeps_unmasked_and_replaces_masked_exactly(case):
    x, p = case
    before = x.copy()
    out = apply_pattern(x, p)
    sel = p.mask.astype(bool)
    assert np.array_equal(out[~sel], x[~sel])
    assert np.array_equal(out[sel], p.colors[sel])
    assert np.array_equal(x, before)


@given(image_and_pattern())
def test_empty_mask_is_identity(case):
    x, p = case
    out = apply_pattern(x, Pattern(np.zeros_like(p.mask), p.colors))
    assert np.array_equal(out, x)


@given(arrays(np.uint8, st.tuples(st.integers(1, 10), st.integers(1, 10)), elements=st.integers(0, 1)))
def test_pixel_set_round_trip(m):
    coords = pixel_set(m)
    assert np.array_equal(mask_of(coords, *m.shape), m)
    assert pixel_set(mask_of(coords, *m.shape)) == coords
    assert l0_norm(m) == len(coords)


def test_mask_of_rejects_duplicates_and_out_of_range():
    with pytest.raises(ValueError):
        mask_of([(0, 0), (0, 0)], 3, 3)
    with pytest.raises(IndexError):
        mask_of([(3, 0)], 3, 3)


def test_pattern_is_read_only_and_shape_checked():
    p = Pattern(np.ones((2, 2), np.uint8), np.zeros((2, 2, 3)))
    with pytest.raises(ValueError):
        p.mask[0, 0] = 0
    with pytest.raises(ShapeError):
        Pattern(np.ones((2, 2), np.uint8), np.zeros((2, 3, 3)))
    with pytest.raises(ShapeError):
        apply_pattern(np.zeros((3, 3, 3)), p)


def test_validators():
    with pytest.raises(ShapeError):
        as_image(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        as_image(np.full((2, 2, 3), 1.5))
    with pytest.raises(ValueError):
        as_mask(np.full((2, 2), 2))
    assert as_mask(np.array([[True, False]])).dtype == np.uint8


def test_quantize_rounds_half_up():
    assert quantize(np.array([0.0, 1.0, 0.5 / 255, 1.49 / 255])).tolist() == [0, 255, 1, 1]
    b = np.arange(256, dtype=np.uint8)
    assert np.array_equal(quantize(dequantize(b)), b)


@pytest.mark.parametrize("suffix", [".png", ".ppm"])
def test_image_round_trip_is_lossless_on_the_8bit_grid(tmp_path, rng, suffix):
    x = dequantize(rng.integers(0, 256, (7, 5, 3)))
    path = tmp_path / f"img{suffix}"
    save_image(x, path)
    assert np.array_equal(load_image(path), x)


def test_mask_round_trip(tmp_path, rng):
    m = rng.integers(0, 2, (6, 9)).astype(np.uint8)
    save_mask(m, tmp_path / "m.png")
    assert np.array_equal(load_mask(tmp_path / "m.png"), m)


def test_io_errors(tmp_path):
    with pytest.raises(UnreadableImageError):
        load_image(tmp_path / "missing.png")
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"not an image at all")
    with pytest.raises(MalformedImageError):
        load_image(bad)
    deep = tmp_path / "deep.png"
    Image.fromarray(np.zeros((4, 4), np.uint16)).save(deep)
    with pytest.raises(UnsupportedBitDepthError):
        load_image(deep)
    ppm16 = tmp_path / "deep.ppm"
    ppm16.write_bytes(b"P6\n1 1\n65535\n" + b"\0" * 6)
    with pytest.raises(UnsupportedBitDepthError):
        load_image(ppm16)
    short = tmp_path / "short.ppm"
    short.write_bytes(b"P6\n2 2\n255\n" + b"\0" * 5)
    with pytest.raises(MalformedImageError):
        load_image(short)
