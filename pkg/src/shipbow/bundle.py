"""Versioned model bundle: codebook + one-vs-one SVM + configuration.

A bundle is a zip archive with three members:

``manifest.json``
    format name, version, configuration, class names, dataset split info and
    the build log.
``codebook.bin``
    magic ``SBCB``, uint32 format version, uint64 rows, uint64 cols (all
    little-endian) followed by the centers as little-endian float64, row-major.
``svm.json``
    one object per class pair with gamma, bias, alphas, labels and support
    vectors.

Archive timestamps are fixed so identical models serialize to identical bytes.
"""
import io
import json
import struct
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codebook import Codebook
from .config import PipelineConfig
from .errors import BundleFormatError
from .svm import BinarySvmModel, MulticlassSvmModel

FORMAT_NAME = "shipbow-bundle"
FORMAT_VERSION = "1.0"
_CB_MAGIC = b"SBCB"
_CB_HEADER = struct.Struct("<4sIQQ")
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


@dataclass
class ModelBundle:
    config: PipelineConfig
    codebook: Codebook
    classifier: MulticlassSvmModel
    class_names: list
    build_log: list = field(default_factory=list)  # {"path", "reason"} per excluded image
    dataset: dict = field(default_factory=dict)
    version: str = FORMAT_VERSION


def _codebook_bytes(cb):
    centers = np.ascontiguousarray(cb.centers, dtype="<f8")
    rows, cols = centers.shape
    return _CB_HEADER.pack(_CB_MAGIC, 1, rows, cols) + centers.tobytes()


def _codebook_from_bytes(data, meta):
    if len(data) < _CB_HEADER.size:
        raise BundleFormatError("codebook.bin is truncated")
    magic, ver, rows, cols = _CB_HEADER.unpack_from(data)
    if magic != _CB_MAGIC or ver != 1:
        raise BundleFormatError("codebook.bin has a bad header")
    body = data[_CB_HEADER.size :]
    if len(body) != rows * cols * 8:
        raise BundleFormatError("codebook.bin size does not match its header")
    centers = np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)
    return Codebook(centers, seed=meta.get("seed", 0), inertia=meta.get("inertia", float("nan")),
                    n_iter=meta.get("n_iter", 0))


def _svm_doc(model):
    pairs = []
    for (a, b), m in sorted(model.pairwise.items()):
        pairs.append({
            "classes": [a, b],
            "gamma": m.gamma,
            "c": m.c,
            "bias": m.bias,
            "alphas": m.alphas.tolist(),
            "sv_labels": m.sv_labels.astype(int).tolist(),
            "support_vectors": m.support_vectors.tolist(),
        })
    return {"class_names": list(model.class_names), "pairs": pairs}


def _svm_from_doc(doc, dim):
    pairwise = {}
    for p in doc["pairs"]:
        sv = np.asarray(p["support_vectors"], dtype=np.float64).reshape(-1, dim)
        pairwise[tuple(p["classes"])] = BinarySvmModel(
            support_vectors=sv,
            alphas=np.asarray(p["alphas"], dtype=np.float64),
            sv_labels=np.asarray(p["sv_labels"], dtype=np.float64),
            bias=float(p["bias"]),
            gamma=float(p["gamma"]),
            c=float(p["c"]),
        )
    return MulticlassSvmModel(class_names=list(doc["class_names"]), pairwise=pairwise)


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True).encode("utf-8")


def bundle_bytes(bundle):
    """Serialize ``bundle`` to the zip byte string."""
    cb = bundle.codebook
    manifest = {
        "format": FORMAT_NAME,
        "version": bundle.version,
        "config": bundle.config.to_dict(),
        "class_names": list(bundle.class_names),
        "codebook": {"k": cb.k, "dim": cb.dim, "seed": cb.seed, "inertia": cb.inertia, "n_iter": cb.n_iter},
        "dataset": bundle.dataset,
        "build_log": bundle.build_log,
    }
    members = [
        ("manifest.json", _dumps(manifest)),
        ("codebook.bin", _codebook_bytes(cb)),
        ("svm.json", _dumps(_svm_doc(bundle.classifier))),
    ]
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for name, data in members:
            info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            zf.writestr(info, data)
    return buf.getvalue()


def save_bundle(bundle, path):
    Path(path).write_bytes(bundle_bytes(bundle))


def bundle_from_bytes(data):
    try:
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            cb_data = zf.read("codebook.bin")
            svm_doc = json.loads(zf.read("svm.json"))
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
        raise BundleFormatError(f"not a model bundle: {exc}") from exc
    if manifest.get("format") != FORMAT_NAME:
        raise BundleFormatError("not a shipbow model bundle")
    major = str(manifest.get("version", "")).split(".")[0]
    if major != FORMAT_VERSION.split(".")[0]:
        raise BundleFormatError(f"unsupported bundle version {manifest.get('version')!r}")
    codebook = _codebook_from_bytes(cb_data, manifest.get("codebook", {}))
    return ModelBundle(
        config=PipelineConfig.from_dict(manifest["config"]),
        codebook=codebook,
        classifier=_svm_from_doc(svm_doc, codebook.k),
        class_names=list(manifest["class_names"]),
        build_log=list(manifest.get("build_log", [])),
        dataset=dict(manifest.get("dataset", {})),
        version=manifest["version"],
    )


def load_bundle(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such bundle: {path}")
    return bundle_from_bytes(path.read_bytes())
