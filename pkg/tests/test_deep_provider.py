import numpy as np
import pytest

from shipbow.descriptors import ProviderConfig, load_provider
from shipbow.errors import DimensionMismatch, InferenceFailure, ModelFormatInvalid
from shipbow.imagecore import Patch

pytest.importorskip("onnxruntime")
onnx_models = pytest.importorskip("onnx_models")


def patch_of(pixels):
    return Patch(center=(0, 0), side=pixels.shape[0], pixels=np.ascontiguousarray(pixels, dtype=np.uint8))


def deep(path, **kw):
    return load_provider(ProviderConfig(kind="deep", model_path=str(path), **kw))


def uniform_patch(rgb, side=32):
    return patch_of(np.full((side, side, 3), rgb))


def test_deep_provider_output_matches_model_math(tmp_path):
    path = tmp_path / "m.onnx"
    w, b = onnx_models.feature_model(path)
    prov = deep(path)
    assert prov.dim == 128 and prov.input_side == 16
    v = prov.describe(uniform_patch((255, 128, 0)))
    x = (np.array([255, 128, 0]) / 255.0 - np.array([0.485, 0.456, 0.406])) / np.array([0.229, 0.224, 0.225])
    assert v.shape == (128,) and np.all(np.isfinite(v))
    assert np.allclose(v, x @ w + b, atol=1e-4)


def test_deep_provider_metadata_preprocessing_and_nhwc(tmp_path):
    path = tmp_path / "m.onnx"
    meta = {"shipbow.mean": "0,0,0", "shipbow.std": "1,1,1", "shipbow.scale": "1", "shipbow.channel_order": "BGR"}
    w, b = onnx_models.feature_model(path, layout="NHWC", metadata=meta)
    v = deep(path).describe(uniform_patch((10, 20, 30)))
    assert np.allclose(v, np.array([30, 20, 10]) @ w + b, rtol=1e-5)


def test_deep_provider_batches_match_single(tmp_path):
    path = tmp_path / "m.onnx"
    onnx_models.feature_model(path)
    prov = deep(path)
    rng = np.random.default_rng(0)
    patches = [patch_of(rng.integers(0, 256, (s, s, 3))) for s in (16, 64, 128)]
    many = prov.describe_many(patches)
    assert many.shape == (3, 128)
    for p, row in zip(patches, many):
        assert np.allclose(prov.describe(p), row, atol=1e-5)


def test_deep_fixed_batch_model(tmp_path):
    path = tmp_path / "m.onnx"
    onnx_models.feature_model(path, batch=1)
    prov = deep(path)
    assert prov.describe_many([uniform_patch((1, 2, 3)), uniform_patch((4, 5, 6))]).shape == (2, 128)


def test_deep_output_selection(tmp_path):
    path = tmp_path / "m.onnx"
    onnx_models.feature_model(path, extra_output=True)
    with pytest.raises(ModelFormatInvalid):
        deep(path)
    assert deep(path, output_name="feat").dim == 128
    with pytest.raises(ModelFormatInvalid):
        deep(path, output_name="nope")


def test_deep_width_mismatch(tmp_path):
    path = tmp_path / "m.onnx"
    onnx_models.feature_model(path, width=64)
    with pytest.raises(DimensionMismatch):
        deep(path)
    assert deep(path, output_dim=64).dim == 64


def test_deep_invalid_file(tmp_path):
    path = tmp_path / "junk.onnx"
    path.write_bytes(b"\x00\x01 definitely not protobuf")
    with pytest.raises(ModelFormatInvalid):
        deep(path)


def test_deep_non_finite_output(tmp_path):
    path = tmp_path / "m.onnx"
    onnx_models.feature_model(path, nan=True)
    with pytest.raises(InferenceFailure):
        deep(path).describe(uniform_patch((1, 2, 3)))
