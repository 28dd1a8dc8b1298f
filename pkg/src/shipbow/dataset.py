"""Directory-per-class datasets and their seeded, stratified train/test split."""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyClass, NoClasses
from .imagecore import SUPPORTED_SUFFIXES

DEFAULT_TRAIN_FRACTION = 1000 / 1400


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    split: str  # "train" or "test"


@dataclass
class DatasetManifest:
    classes: list
    entries: list = field(default_factory=list)
    root: str = None
    split_seed: int = 0
    train_fraction: float = DEFAULT_TRAIN_FRACTION

    def split(self, name):
        return [e for e in self.entries if e.split == name]

    def counts(self):
        out = {}
        for e in self.entries:
            out.setdefault(e.label, {"train": 0, "test": 0})[e.split] += 1
        return out


def _images_in(folder):
    return sorted(p for p in folder.iterdir() if p.is_file() and p.suffix.lower() in SUPPORTED_SUFFIXES)


def scan_dataset(root, split_seed=0, train_fraction=DEFAULT_TRAIN_FRACTION):
    """Build a manifest from ``root/<class>/*.{png,jpg,jpeg}``.

    Each class is shuffled with a generator seeded by ``split_seed`` and the
    first ``round(train_fraction * n)`` images (at least one, and at most
    n - 1 when n >= 2) go to the train split.
    """
    if not 0 < train_fraction <= 1:
        raise ValueError("train_fraction must lie in (0, 1]")
    root = Path(root)
    if not root.is_dir():
        raise NoClasses(f"{root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir() and not p.name.startswith("."))
    if not class_dirs:
        raise NoClasses(f"{root} has no class subdirectories")
    rng = np.random.default_rng(split_seed)
    entries = []
    for cdir in class_dirs:
        files = _images_in(cdir)
        if not files:
            raise EmptyClass(f"class {cdir.name!r} has no images")
        n = len(files)
        n_train = int(round(train_fraction * n))
        n_train = max(1, min(n_train, n - 1)) if n >= 2 else 1
        order = rng.permutation(n)
        train_idx = set(order[:n_train].tolist())
        for i, f in enumerate(files):
            entries.append(ManifestEntry(str(f), cdir.name, "train" if i in train_idx else "test"))
    return DatasetManifest(
        classes=[c.name for c in class_dirs],
        entries=entries,
        root=str(root),
        split_seed=split_seed,
        train_fraction=train_fraction,
    )
