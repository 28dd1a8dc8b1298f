import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from shipbow.errors import CenterOutOfBounds, CorruptImage, ImageNotFound, ImageTooSmall, UnsupportedFormat
from shipbow.imagecore import (
    extract_patch,
    gradient_magnitude,
    load_image,
    pixel_index,
    save_image,
    to_grayscale,
    window_gradient_sum,
)


def test_grayscale_known_colors():
    img = np.array([[[255, 255, 255], [0, 0, 0], [255, 0, 0], [0, 255, 0], [0, 0, 255]]], dtype=np.uint8)
    g = to_grayscale(img)
    assert g[0, 0] == 1.0
    assert g[0, 1] == 0.0
    assert g[0, 2] == pytest.approx(0.299, abs=1e-15)
    assert g[0, 3] == pytest.approx(0.587, abs=1e-15)
    assert g[0, 4] == pytest.approx(0.114, abs=1e-15)


@given(st.lists(st.integers(0, 255), min_size=3, max_size=3))
def test_grayscale_range(rgb):
    g = to_grayscale(np.array([[rgb]], dtype=np.uint8))[0, 0]
    assert 0.0 <= g <= 1.0


def test_gradient_of_step_and_ramp():
    step = np.zeros((5, 6))
    step[:, 3:] = 1.0
    mag = gradient_magnitude(step)
    # central differences put half the step on each side of the edge
    assert np.allclose(mag[:, 2], 0.5) and np.allclose(mag[:, 3], 0.5)
    assert np.allclose(mag[:, [0, 5]], 0.0)

    ramp = np.tile(np.arange(7, dtype=float) * 0.1, (4, 1))
    assert np.allclose(gradient_magnitude(ramp), 0.1)


def test_gradient_needs_3x3():
    with pytest.raises(ImageTooSmall):
        gradient_magnitude(np.zeros((2, 5)))


def test_window_sum_clips_at_border():
    field = np.ones((10, 10))
    assert window_gradient_sum(field, (5, 5), 1) == 9.0
    assert window_gradient_sum(field, (0, 0), 1) == 4.0
    assert window_gradient_sum(field, (9.4, 0), 2) == 9.0


@pytest.mark.parametrize("v, idx", [(2.0, 2), (2.49, 2), (2.5, 3), (0.0, 0), (3.7, 4)])
def test_pixel_index(v, idx):
    assert pixel_index(v) == idx


def test_patch_centered_inside():
    img = np.arange(20 * 30 * 3, dtype=np.uint8).reshape(20, 30, 3)
    p = extract_patch(img, (15, 10), 4)
    assert p.pixels.shape == (4, 4, 3)
    assert np.array_equal(p.pixels, img[8:12, 13:17])


def test_patch_at_corner_replicates_edge():
    img = np.zeros((8, 8, 3), dtype=np.uint8)
    img[0, 0] = (200, 100, 50)
    p = extract_patch(img, (0, 0), 6, enlarged=True)
    # rows/cols -3..2 clamp to 0..2, so the top-left 4x4 block repeats pixel (0, 0)
    assert np.all(p.pixels[:4, :4] == (200, 100, 50))
    assert np.all(p.pixels[4:, :] == 0) and np.all(p.pixels[:, 4:] == 0)
    assert p.enlarged


def test_patch_center_out_of_bounds():
    img = np.zeros((8, 8, 3), dtype=np.uint8)
    for c in [(-0.1, 3), (8, 3), (3, 8.2)]:
        with pytest.raises(CenterOutOfBounds):
            extract_patch(img, c, 4)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 20), st.integers(1, 20), st.integers(1, 40),
    st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True),
)
def test_patch_shape_and_values_come_from_image(h, w, side, fx, fy):
    rng = np.random.default_rng(h * 100 + w)
    img = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
    p = extract_patch(img, (fx * w, fy * h), side)
    assert p.pixels.shape == (side, side, 3)
    colors = {tuple(c) for c in img.reshape(-1, 3)}
    assert all(tuple(c) in colors for c in p.pixels.reshape(-1, 3))


def test_load_roundtrip_png(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (9, 7, 3), dtype=np.uint8)
    path = tmp_path / "a.png"
    save_image(path, img)
    assert np.array_equal(load_image(path), img)


def test_load_gray_and_rgba(tmp_path):
    Image.fromarray(np.full((4, 4), 77, np.uint8), mode="L").save(tmp_path / "g.png")
    assert np.all(load_image(tmp_path / "g.png") == 77)
    rgba = np.zeros((4, 4, 4), np.uint8)
    rgba[..., 0] = 10
    rgba[..., 3] = 0
    Image.fromarray(rgba, mode="RGBA").save(tmp_path / "a.png")
    out = load_image(tmp_path / "a.png")
    assert out.shape == (4, 4, 3) and np.all(out[..., 0] == 10)


def test_load_16bit_png(tmp_path):
    arr = np.full((4, 4), 65535, dtype=np.uint16)
    Image.fromarray(arr).save(tmp_path / "w.png")
    assert np.all(load_image(tmp_path / "w.png") == 255)


def test_load_errors(tmp_path):
    with pytest.raises(ImageNotFound):
        load_image(tmp_path / "missing.png")
    (tmp_path / "x.bmp").write_bytes(b"BM")
    with pytest.raises(UnsupportedFormat):
        load_image(tmp_path / "x.bmp")
    (tmp_path / "bad.png").write_bytes(b"not an image at all")
    with pytest.raises(CorruptImage):
        load_image(tmp_path / "bad.png")
    # a GIF renamed to .png decodes, but is not an accepted format
    Image.new("P", (4, 4)).save(tmp_path / "fake.png", format="GIF")
    with pytest.raises(UnsupportedFormat):
        load_image(tmp_path / "fake.png")


def test_truncated_png_is_corrupt(tmp_path):
    path = tmp_path / "t.png"
    save_image(path, np.zeros((32, 32, 3), np.uint8))
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(CorruptImage):
        load_image(path)
