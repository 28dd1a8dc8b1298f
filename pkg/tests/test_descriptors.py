import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shipbow.descriptors import (
    HANDCRAFTED_DIM,
    HandcraftedProvider,
    ProviderConfig,
    describe,
    describe_selection,
    load_provider,
)
from shipbow.dogdetect import Keypoint
from shipbow.errors import (
    ConfigError,
    DimensionMismatch,
    ModelFileMissing,
    PatchTooSmall,
)
from shipbow.imagecore import Patch, extract_patch
from shipbow.selection import ScoredKeypoint, SelectionParams, SelectionResult


def patch_of(pixels, enlarged=False):
    return Patch(center=(0, 0), side=pixels.shape[0], pixels=np.ascontiguousarray(pixels, dtype=np.uint8),
                 enlarged=enlarged)


def blocks(vec):
    return vec[:48], vec[48:112], vec[112:]


def test_handcrafted_layout_on_uniform_patch():
    v = describe(HandcraftedProvider(), patch_of(np.full((64, 64, 3), (255, 0, 40))))
    assert v.shape == (HANDCRAFTED_DIM,)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    color, grid, orient = blocks(v)
    # a flat patch has no gradients: only the colour block carries mass
    assert np.all(grid == 0) and np.all(orient == 0)
    assert np.flatnonzero(color).tolist() == [15, 16, 32 + 2]
    assert np.allclose(color[[15, 16, 34]], 1 / np.sqrt(3))


def test_handcrafted_gradient_blocks():
    px = np.zeros((64, 64, 3), np.uint8)
    px[:, 32:] = 255  # vertical step: gradient along +x
    color, grid, orient = blocks(HandcraftedProvider().describe(patch_of(px)))
    cells = grid.reshape(8, 8)
    assert np.all(cells[:, [3, 4]] > 0) and np.all(cells[:, [0, 1, 2, 5, 6, 7]] == 0)
    assert np.argmax(orient) == 0 and np.count_nonzero(orient) == 1


def test_rotating_a_step_moves_orientation_bin():
    px = np.zeros((64, 64, 3), np.uint8)
    px[32:, :] = 255  # gradient along +y, i.e. 90 degrees
    _, _, orient = blocks(HandcraftedProvider().describe(patch_of(px)))
    assert np.argmax(orient) == 4


@settings(max_examples=40, deadline=None)
@given(st.integers(8, 70), st.integers(0, 2**32 - 1))
def test_handcrafted_unit_norm_nonnegative(side, seed):
    px = np.random.default_rng(seed).integers(0, 256, (side, side, 3), dtype=np.uint8)
    v = HandcraftedProvider().describe(patch_of(px))
    assert v.shape == (128,) and np.all(v >= 0)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    for b in blocks(v):
        assert np.linalg.norm(b) <= 1.0 + 1e-12


def test_handcrafted_deterministic():
    px = np.random.default_rng(1).integers(0, 256, (64, 64, 3), dtype=np.uint8)
    a = HandcraftedProvider().describe(patch_of(px))
    b = HandcraftedProvider().describe(patch_of(px.copy()))
    assert np.array_equal(a, b)


def test_patch_too_small():
    with pytest.raises(PatchTooSmall):
        HandcraftedProvider().describe(patch_of(np.zeros((7, 7, 3))))


def test_provider_config_validation():
    with pytest.raises(ConfigError):
        ProviderConfig(kind="sift")
    with pytest.raises(DimensionMismatch):
        load_provider(ProviderConfig(output_dim=64))
    with pytest.raises(ModelFileMissing):
        load_provider(ProviderConfig(kind="deep", model_path="/nonexistent/model.onnx"))
    with pytest.raises(ModelFileMissing):
        load_provider(ProviderConfig(kind="deep"))


def test_describe_selection_uses_enlarged_side():
    img = np.random.default_rng(2).integers(0, 256, (100, 120, 3), dtype=np.uint8)
    sk = ScoredKeypoint(Keypoint(50.0, 40.0, 1.6, 0.1), 1.0)
    sk2 = ScoredKeypoint(Keypoint(10.0, 90.0, 1.6, 0.1), 0.5)
    res = SelectionResult([(sk, False), (sk2, False), (sk, True), (sk2, True), (sk, True)], 2, 3)
    params = SelectionParams()
    prov = HandcraftedProvider()
    out = describe_selection(prov, img, res, params)
    assert out.shape == (5, 128)
    assert np.array_equal(out[0], prov.describe(extract_patch(img, (50.0, 40.0), 64)))
    assert np.array_equal(out[2], prov.describe(extract_patch(img, (50.0, 40.0), 128)))
    assert np.array_equal(out[2], out[4])
    assert not np.array_equal(out[0], out[2])
    assert describe_selection(prov, img, SelectionResult(), params).shape == (0, 128)
