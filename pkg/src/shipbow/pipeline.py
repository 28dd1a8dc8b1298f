"""Training, prediction, evaluation and parameter sweeps.

Per image: load -> grayscale -> DoG keypoints -> gradient field -> score and
sort -> greedy dispersed selection -> enlarged-patch augmentation -> patch
descriptors. Training pools the descriptors of every train image, builds the
k-means codebook, encodes each image as a BoW histogram and fits the
one-vs-one SVM.
"""
import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import codebook as cbmod
from . import svm
from .bundle import ModelBundle
from .descriptors import describe_selection, load_provider
from .dogdetect import detect_keypoints
from .errors import EmptyGrid, EmptySplit, SingleClassInput, TooFewDescriptors, ZeroKeypoints
from .imagecore import gradient_magnitude, load_image, to_grayscale
from .selection import augment_remainder, greedy_select, score_and_sort

logger = logging.getLogger(__name__)

# (DistTH, minOver, TopN, Nbins) per row
DEFAULT_SWEEP_GRID = (
    (10, 2, 150, 100),
    (5, 2, 150, 100),
    (15, 2, 150, 100),
    (20, 2, 150, 100),
    (15, 3, 150, 100),
    (15, 2, 120, 100),
    (15, 2, 100, 100),
    (15, 2, 100, 70),
    (15, 2, 100, 50),
)
SWEEP_COLUMNS = ("DistTH", "minOver", "TopN", "Nbins", "Er_train", "Er_test")


@dataclass
class ImageAnalysis:
    image: np.ndarray
    keypoints: list
    selection: object  # SelectionResult after augmentation


def analyze_image(image, config):
    """Keypoints and augmented selection for an RGB array."""
    gray = to_grayscale(image)
    keypoints = detect_keypoints(gray, config.scale_space)
    if not keypoints:
        return ImageAnalysis(image, [], None)
    field_ = gradient_magnitude(gray)
    ordered = score_and_sort(field_, keypoints, config.selection.score_half_width)
    result = augment_remainder(greedy_select(ordered, config.selection), config.selection)
    return ImageAnalysis(image, keypoints, result)


def extract_image_descriptors(path, config, provider=None):
    """Descriptor matrix ``(n, D)`` for one image file."""
    provider = provider or load_provider(config.provider)
    analysis = analyze_image(load_image(path), config)
    if analysis.selection is None:
        raise ZeroKeypoints(f"{path}: no keypoints detected")
    return describe_selection(provider, analysis.image, analysis.selection, config.selection)


def _extract_all(paths, config, provider, jobs=1):
    """(descriptors or None, failure reason or None) per path, in input order."""

    def one(path):
        try:
            return extract_image_descriptors(path, config, provider), None
        except ZeroKeypoints:
            return None, "no keypoints detected"

    if jobs > 1 and not provider.serial_only:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, paths))
    return [one(p) for p in paths]


def _fit(train_items, config, dataset_info=None):
    """Codebook + SVM from [(path, label, descriptors or None, reason)]."""
    build_log = []
    pooled, kept = [], []
    for path, label, desc, reason in train_items:
        if desc is None:
            build_log.append({"path": path, "label": label, "reason": reason})
            continue
        pooled.append(desc)
        kept.append((path, label, desc))
    if not kept:
        raise TooFewDescriptors("no training image produced descriptors")
    labels = [label for _, label, _ in kept]
    if len(set(labels)) < 2:
        raise SingleClassInput(f"training split covers only {sorted(set(labels))}")
    fea = np.concatenate(pooled, axis=0)
    logger.info("Fea set: %d descriptors from %d images", fea.shape[0], len(kept))
    cb = cbmod.kmeans_fit(fea, config.nbins, seed=config.kmeans_seed,
                          max_iter=config.kmeans_max_iter, tol=config.kmeans_tol)
    hist = np.stack([cbmod.encode_bow(cb, d) for _, _, d in kept])
    svm_params = config.svm
    if svm_params.grid_search:
        svm_params = svm.grid_search(hist, labels, svm_params, seed=config.kmeans_seed)
        config = replace(config, svm=replace(svm_params, grid_search=True))
    classifier = svm.train_multiclass(hist, labels, svm_params)
    return ModelBundle(
        config=config,
        codebook=cb,
        classifier=classifier,
        class_names=list(classifier.class_names),
        build_log=build_log,
        dataset=dict(dataset_info or {}),
    )


def _dataset_info(manifest):
    return {"split_seed": manifest.split_seed, "train_fraction": manifest.train_fraction}


def train_pipeline(manifest, config, provider=None, jobs=1):
    """Train a ModelBundle on the manifest's train split.

    Images without keypoints are left out of training and recorded in the
    bundle's build log.
    """
    provider = provider or load_provider(config.provider)
    train = manifest.split("train")
    if not train:
        raise EmptySplit("train split is empty")
    extracted = _extract_all([e.path for e in train], config, provider, jobs)
    items = [(e.path, e.label, d, r) for e, (d, r) in zip(train, extracted)]
    return _fit(items, config, _dataset_info(manifest))


def _classify(bundle, desc):
    hist = cbmod.encode_bow(bundle.codebook, desc)
    return svm.predict(bundle.classifier, hist)


def predict_image(bundle, path, provider=None):
    """Class name predicted for one image file."""
    provider = provider or load_provider(bundle.config.provider)
    return _classify(bundle, extract_image_descriptors(path, bundle.config, provider))


@dataclass
class EvalReport:
    classes: list
    per_image: list  # (path, true label, predicted label or None)
    failures: list  # (path, reason)
    confusion: np.ndarray  # rows: true class, cols: predicted class
    split: str = "test"

    @property
    def total(self):
        return len(self.per_image)

    @property
    def n_correct(self):
        return sum(1 for _, t, c in self.per_image if c == t)

    @property
    def n_wrong(self):
        return self.total - self.n_correct

    @property
    def error_fraction(self):
        """Exact mismatch fraction."""
        return Fraction(self.n_wrong, self.total)

    @property
    def accuracy_fraction(self):
        return Fraction(self.n_correct, self.total)

    @property
    def error(self):
        return self.n_wrong / self.total

    @property
    def accuracy(self):
        return self.n_correct / self.total

    def to_text(self):
        width = max([len(c) for c in self.classes] + [6])
        lines = [
            f"split: {self.split}",
            f"Total: {self.total}",
            f"Er: {self.error:.6f} ({100 * self.error:.2f}%)",
            f"failures: {len(self.failures)}",
            "confusion (rows = true, cols = predicted):",
            " " * (width + 1) + " ".join(f"{c:>{width}}" for c in self.classes),
        ]
        for name, row in zip(self.classes, self.confusion):
            lines.append(f"{name:>{width}} " + " ".join(f"{int(v):>{width}}" for v in row))
        for path, reason in self.failures:
            lines.append(f"failed: {path}: {reason}")
        return "\n".join(lines) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["split", "Total", "Er", "failures"])
        w.writerow([self.split, self.total, repr(self.error), len(self.failures)])
        w.writerow([])
        w.writerow(["true\\predicted"] + list(self.classes))
        for name, row in zip(self.classes, self.confusion):
            w.writerow([name] + [int(v) for v in row])
        return buf.getvalue()


def score_predictions(classes, per_image, failures=(), split="test"):
    """EvalReport from (path, true, predicted) triples.

    A predicted label of None marks a failed image: it counts as a mismatch
    and stays out of the confusion matrix.
    """
    if not per_image:
        raise EmptySplit(f"{split} split is empty")
    classes = list(classes)
    index = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for _, t, c in per_image:
        if c is not None:
            confusion[index[t], index[c]] += 1
    return EvalReport(classes, list(per_image), list(failures), confusion, split)


def evaluate(bundle, manifest, split="test", provider=None, jobs=1):
    """Mismatch rate over ``split``; images without keypoints count as errors."""
    entries = manifest.split(split)
    if not entries:
        raise EmptySplit(f"{split} split is empty")
    provider = provider or load_provider(bundle.config.provider)
    extracted = _extract_all([e.path for e in entries], bundle.config, provider, jobs)
    return _score_extracted(bundle, entries, extracted, split)


def _score_extracted(bundle, entries, extracted, split):
    per_image, failures = [], []
    for e, (desc, reason) in zip(entries, extracted):
        if desc is None:
            failures.append((e.path, reason))
            per_image.append((e.path, e.label, None))
        else:
            per_image.append((e.path, e.label, _classify(bundle, desc)))
    classes = list(bundle.class_names)
    for _, t, _ in per_image:
        if t not in classes:
            classes.append(t)
    return score_predictions(classes, per_image, failures, split)


@dataclass
class SweepRow:
    dist_th: float
    min_over: int
    top_n: int
    nbins: int
    er_train: float = float("nan")
    er_test: float = float("nan")
    error: str = None

    def csv_cells(self):
        def pct(v):
            return "nan" if v != v else f"{100 * v:.2f}"

        return [f"{self.dist_th:g}", self.min_over, self.top_n, self.nbins, pct(self.er_train), pct(self.er_test)]


@dataclass
class _ExtractionCache:
    """Descriptors per (selection params, path); extraction is deterministic."""

    provider: object
    jobs: int = 1
    store: dict = field(default_factory=dict)

    def get(self, entries, config):
        key = (config.scale_space, config.selection, config.provider)
        if key not in self.store:
            self.store[key] = {}
        cache = self.store[key]
        missing = [e.path for e in entries if e.path not in cache]
        for path, res in zip(missing, _extract_all(missing, config, self.provider, self.jobs)):
            cache[path] = res
        return [cache[e.path] for e in entries]


def sweep(manifest, base_config, grid=DEFAULT_SWEEP_GRID, provider=None, jobs=1):
    """Train and evaluate once per (dist_th, min_over, top_n, nbins) row.

    Rows come back in grid order; a row whose training fails carries the
    error message and NaN errors.
    """
    grid = list(grid)
    if not grid:
        raise EmptyGrid("sweep grid is empty")
    provider = provider or load_provider(base_config.provider)
    cache = _ExtractionCache(provider, jobs)
    train, test = manifest.split("train"), manifest.split("test")
    rows = []
    for dist_th, min_over, top_n, nbins in grid:
        row = SweepRow(float(dist_th), int(min_over), int(top_n), int(nbins))
        try:
            config = base_config.with_sweep_row(dist_th, min_over, top_n, nbins)
            train_x = cache.get(train, config)
            items = [(e.path, e.label, d, r) for e, (d, r) in zip(train, train_x)]
            bundle = _fit(items, config, _dataset_info(manifest))
            row.er_train = _score_extracted(bundle, train, train_x, "train").error
            if test:
                row.er_test = _score_extracted(bundle, test, cache.get(test, config), "test").error
        except Exception as exc:  # a failed row is reported, not fatal
            logger.warning("sweep row %s failed: %s", (dist_th, min_over, top_n, nbins), exc)
            row.error = f"{type(exc).__name__}: {exc}"
        rows.append(row)
        logger.info("sweep row %s -> Er_train=%s Er_test=%s", row.csv_cells()[:4], row.er_train, row.er_test)
    return rows


def sweep_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        w.writerow(row.csv_cells())
    return buf.getvalue()


def read_grid_csv(text):
    """Parse a grid CSV with DistTH,minOver,TopN,Nbins columns (header optional)."""
    rows = []
    for rec in csv.reader(io.StringIO(text)):
        if not rec or not "".join(rec).strip():
            continue
        if rec[0].strip() == "DistTH":
            continue
        if len(rec) < 4:
            raise ValueError(f"grid row needs 4 values: {rec}")
        rows.append((float(rec[0]), int(rec[1]), int(rec[2]), int(rec[3])))
    return rows
