"""Patch descriptors behind a small provider interface.

Two providers exist:

``handcrafted``
    Deterministic 128-d vector: 48-bin RGB histogram (16 bins per channel),
    8x8 grid of mean gradient magnitude, 16-bin gradient orientation
    histogram; each block and then the concatenation is L2-normalised.
``deep``
    Penultimate-layer activations of a pretrained CNN stored as ONNX.
"""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    ConfigError,
    DimensionMismatch,
    InferenceFailure,
    ModelFileMissing,
    ModelFormatInvalid,
    PatchTooSmall,
)
from .imagecore import extract_patch, to_grayscale

logger = logging.getLogger(__name__)

MIN_PATCH_SIDE = 8
HANDCRAFTED_DIM = 128

# ImageNet statistics, used when the model file declares no preprocessing
DEFAULT_MEAN = (0.485, 0.456, 0.406)
DEFAULT_STD = (0.229, 0.224, 0.225)
DEFAULT_SCALE = 1.0 / 255.0


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "handcrafted"
    model_path: str = None
    input_side: int = 224
    output_dim: int = 128
    output_name: str = None

    def __post_init__(self):
        if self.kind not in ("handcrafted", "deep"):
            raise ConfigError(f"unknown provider kind {self.kind!r}")
        if self.output_dim < 1 or self.input_side < 1:
            raise ConfigError("output_dim and input_side must be >= 1")


class DescriptorProvider:
    """Turns RGB patches into fixed-length vectors.

    ``serial_only`` tells callers whether ``describe`` may be invoked from
    several threads at once.
    """

    dim = 0
    serial_only = False

    def describe(self, patch):
        raise NotImplementedError

    def describe_many(self, patches):
        if not patches:
            return np.zeros((0, self.dim))
        return np.stack([self.describe(p) for p in patches])


def _check_side(patch):
    if patch.side < MIN_PATCH_SIDE:
        raise PatchTooSmall(f"patch side {patch.side} < {MIN_PATCH_SIDE}")


def _join_blocks(*blocks):
    """Concatenate L2-normalised blocks, then L2-normalise the whole vector.

    Per-block normalisation keeps the colour histogram from drowning out the
    gradient blocks. The colour block always has mass, so the norm is never 0.
    """
    parts = []
    for b in blocks:
        n = np.linalg.norm(b)
        parts.append(b / n if n > 0 else b)
    vec = np.concatenate(parts)
    return vec / np.linalg.norm(vec)


class HandcraftedProvider(DescriptorProvider):
    dim = HANDCRAFTED_DIM

    def describe(self, patch):
        _check_side(patch)
        px = patch.pixels
        side = patch.side
        n_pix = float(side * side)

        color = np.concatenate(
            [np.bincount(px[..., ch].ravel() >> 4, minlength=16) / n_pix for ch in range(3)]
        )

        gy, gx = np.gradient(to_grayscale(px))
        mag = np.hypot(gx, gy)
        edges = np.linspace(0, side, 9).astype(np.int64)
        cell_sums = np.add.reduceat(np.add.reduceat(mag, edges[:-1], axis=0), edges[:-1], axis=1)
        sizes = np.diff(edges)
        grid = (cell_sums / np.outer(sizes, sizes)).ravel()

        theta = np.mod(np.arctan2(gy, gx), 2 * np.pi)
        bins = np.minimum((theta * (16 / (2 * np.pi))).astype(np.int64), 15)
        orient = np.bincount(bins.ravel(), weights=mag.ravel(), minlength=16)
        total = orient.sum()
        if total > 0:
            orient = orient / total

        return _join_blocks(color, grid, orient)


def _parse_floats(text, n):
    vals = tuple(float(v) for v in text.replace(";", ",").split(","))
    if len(vals) != n:
        raise ModelFormatInvalid(f"expected {n} comma-separated values, got {text!r}")
    return vals


class OnnxProvider(DescriptorProvider):
    """Penultimate-layer features from an ONNX image model.

    The model must take one image tensor (NCHW or NHWC, 3 channels) and expose
    the feature layer as a graph output. Preprocessing may be declared in the
    model metadata: ``shipbow.mean``, ``shipbow.std`` (three values each),
    ``shipbow.scale`` (multiplier applied to 0..255 pixels) and
    ``shipbow.channel_order`` (``RGB`` or ``BGR``).
    """

    serial_only = False  # onnxruntime sessions are safe to run concurrently

    def __init__(self, config):
        try:
            import onnxruntime as ort
        except ImportError as exc:
            raise InferenceFailure("the deep provider needs onnxruntime (pip install 'artifact[deep]')") from exc
        path = Path(config.model_path)
        try:
            opts = ort.SessionOptions()
            opts.intra_op_num_threads = 1
            self._session = ort.InferenceSession(str(path), opts, providers=["CPUExecutionProvider"])
        except Exception as exc:  # onnxruntime raises its own exception types
            raise ModelFormatInvalid(f"{path}: {exc}") from exc

        inputs = self._session.get_inputs()
        if len(inputs) != 1 or len(inputs[0].shape) != 4:
            raise ModelFormatInvalid(f"{path}: expected a single rank-4 image input")
        self._input_name = inputs[0].name
        shape = inputs[0].shape
        if shape[1] == 3:
            self._layout = "NCHW"
            spatial = shape[2:]
        elif shape[3] == 3:
            self._layout = "NHWC"
            spatial = shape[1:3]
        else:
            raise ModelFormatInvalid(f"{path}: cannot find a 3-channel axis in input shape {shape}")
        if all(isinstance(s, int) for s in spatial):
            if spatial[0] != spatial[1]:
                raise ModelFormatInvalid(f"{path}: non-square input {spatial}")
            self.input_side = spatial[0]
        else:
            self.input_side = config.input_side
        self._fixed_batch = isinstance(shape[0], int)

        outputs = {o.name: o for o in self._session.get_outputs()}
        name = config.output_name
        if name is None:
            if len(outputs) != 1:
                raise ModelFormatInvalid(f"{path}: several outputs {sorted(outputs)}; set provider.output_name")
            name = next(iter(outputs))
        if name not in outputs:
            raise ModelFormatInvalid(f"{path}: no output named {name!r}; have {sorted(outputs)}")
        self._output_name = name
        width = outputs[name].shape[-1] if outputs[name].shape else None
        if not isinstance(width, int):
            raise ModelFormatInvalid(f"{path}: output {name!r} has no static feature width")
        if width != config.output_dim:
            raise DimensionMismatch(f"{path}: output {name!r} is {width} wide, config expects {config.output_dim}")
        self.dim = width

        meta = self._session.get_modelmeta().custom_metadata_map
        self._mean = np.array(_parse_floats(meta["shipbow.mean"], 3) if "shipbow.mean" in meta else DEFAULT_MEAN)
        self._std = np.array(_parse_floats(meta["shipbow.std"], 3) if "shipbow.std" in meta else DEFAULT_STD)
        self._scale = float(meta.get("shipbow.scale", DEFAULT_SCALE))
        self._bgr = meta.get("shipbow.channel_order", "RGB").upper() == "BGR"

    def _prepare(self, patch):
        _check_side(patch)
        im = Image.fromarray(patch.pixels, mode="RGB")
        if patch.side != self.input_side:
            im = im.resize((self.input_side, self.input_side), Image.BILINEAR)
        arr = np.asarray(im, dtype=np.float32) * np.float32(self._scale)
        arr = (arr - self._mean.astype(np.float32)) / self._std.astype(np.float32)
        if self._bgr:
            arr = arr[..., ::-1]
        if self._layout == "NCHW":
            arr = arr.transpose(2, 0, 1)
        return np.ascontiguousarray(arr, dtype=np.float32)

    def _run(self, batch):
        try:
            out = self._session.run([self._output_name], {self._input_name: batch})[0]
        except Exception as exc:
            raise InferenceFailure(str(exc)) from exc
        out = np.asarray(out, dtype=np.float64).reshape(batch.shape[0], -1)
        if out.shape[1] != self.dim or not np.all(np.isfinite(out)):
            raise InferenceFailure(f"model returned {out.shape} with non-finite or mis-sized features")
        return out

    def describe(self, patch):
        return self._run(self._prepare(patch)[None])[0]

    def describe_many(self, patches):
        if not patches:
            return np.zeros((0, self.dim))
        batch = np.stack([self._prepare(p) for p in patches])
        if self._fixed_batch:
            return np.concatenate([self._run(batch[i : i + 1]) for i in range(len(batch))])
        return self._run(batch)


def load_provider(config):
    """Build the provider described by ``config``."""
    if config.kind == "handcrafted":
        if config.output_dim != HANDCRAFTED_DIM:
            raise DimensionMismatch(f"handcrafted descriptors are {HANDCRAFTED_DIM}-d, config asks {config.output_dim}")
        return HandcraftedProvider()
    if not config.model_path or not Path(config.model_path).is_file():
        raise ModelFileMissing(f"deep provider model file not found: {config.model_path}")
    return OnnxProvider(config)


def describe(provider, patch):
    return provider.describe(patch)


def describe_selection(provider, image, result, params):
    """Descriptors for every selected entry, in selection order.

    Enlarged entries are cropped with ``params.enlarged_patch`` instead of
    ``params.base_patch``.
    """
    # augmented entries repeat coordinates; describe each distinct crop once
    keys = []
    unique = {}
    for sk, enlarged in result.selected:
        side = params.enlarged_patch if enlarged else params.base_patch
        key = (sk.x, sk.y, side)
        if key not in unique:
            unique[key] = extract_patch(image, (sk.x, sk.y), side, enlarged)
        keys.append(key)
    if not keys:
        return np.zeros((0, provider.dim))
    order = list(unique)
    vecs = provider.describe_many([unique[k] for k in order])
    row = {k: i for i, k in enumerate(order)}
    return vecs[[row[k] for k in keys]]
