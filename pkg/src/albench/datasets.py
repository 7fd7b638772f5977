"""Dataset loading: CIFAR-10 (python-pickle or binary distribution), generic
image folders with a CSV manifest, and in-memory arrays.

Loaders produce a ``LoadedDataset``: train/test Sample lists, the class
list, and an image bank resolving sample ids to HxWxC uint8 arrays.
"""

from __future__ import annotations

import csv
import pickle
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .errors import ConfigError, MissingImageError
from .pools import Sample, stratified_split

CIFAR_CLASSES = (
    "airplane", "automobile", "bird", "cat", "deer",
    "dog", "frog", "horse", "ship", "truck",
)


class ArrayImageBank:
    """Images held in one uint8 array, keyed by sample id."""

    def __init__(self, ids: Sequence[str], images: np.ndarray):
        if len(ids) != len(images):
            raise ValueError("ids and images length mismatch")
        self._index = {sid: i for i, sid in enumerate(ids)}
        self._images = images

    def get(self, sample_id: str) -> np.ndarray:
        return self._images[self._index[sample_id]]

    def get_many(self, sample_ids: Sequence[str]) -> np.ndarray:
        idx = [self._index[sid] for sid in sample_ids]
        return self._images[idx]


class FolderImageBank:
    """Images loaded lazily from disk, keyed by sample id."""

    def __init__(self, root: str | Path, paths_by_id: dict[str, str]):
        self._root = Path(root)
        self._paths = paths_by_id

    def get(self, sample_id: str) -> np.ndarray:
        path = self._root / self._paths[sample_id]
        if not path.exists():
            raise MissingImageError(str(path))
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))

    def get_many(self, sample_ids: Sequence[str]) -> np.ndarray:
        return np.stack([self.get(sid) for sid in sample_ids])


@dataclass
class LoadedDataset:
    train: list[Sample]
    test: list[Sample]
    class_list: tuple[str, ...]
    bank: ArrayImageBank | FolderImageBank


@dataclass(frozen=True)
class DatasetConfig:
    """Where the experiment data comes from.

    kind: "cifar10" (root = directory of a published CIFAR-10 distribution),
    "folder" (root + CSV manifest), or "synthetic" (generated in memory;
    params forwarded to the generator).
    """

    kind: str
    root: str = ""
    manifest: str = ""
    classes: tuple[int, ...] | None = None
    train_fraction: float = 0.7
    synthetic: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("cifar10", "folder", "synthetic"):
            raise ConfigError("dataset.kind", f"unknown dataset kind {self.kind!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("dataset.train_fraction", "must be in (0, 1)")


# ---------------------------------------------------------------------------
# CIFAR-10
# ---------------------------------------------------------------------------


def _read_cifar_python(root: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, list[str]]:
    def read_batch(name):
        with open(root / name, "rb") as fh:
            batch = pickle.load(fh, encoding="bytes")
        data = batch[b"data"].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
        return data, np.asarray(batch[b"labels"], dtype=np.int64)

    train_parts = [read_batch(f"data_batch_{i}") for i in range(1, 6)]
    x_train = np.concatenate([p[0] for p in train_parts])
    y_train = np.concatenate([p[1] for p in train_parts])
    x_test, y_test = read_batch("test_batch")
    with open(root / "batches.meta", "rb") as fh:
        meta = pickle.load(fh, encoding="bytes")
    names = [n.decode() for n in meta[b"label_names"]]
    return x_train, y_train, x_test, y_test, names


def _read_cifar_binary(root: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, list[str]]:
    def read_bin(name):
        raw = np.fromfile(root / name, dtype=np.uint8).reshape(-1, 3073)
        labels = raw[:, 0].astype(np.int64)
        data = raw[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
        return data, labels

    train_parts = [read_bin(f"data_batch_{i}.bin") for i in range(1, 6)]
    x_train = np.concatenate([p[0] for p in train_parts])
    y_train = np.concatenate([p[1] for p in train_parts])
    x_test, y_test = read_bin("test_batch.bin")
    meta = root / "batches.meta.txt"
    if meta.exists():
        names = [line for line in meta.read_text().splitlines() if line.strip()]
    else:
        names = list(CIFAR_CLASSES)
    return x_train, y_train, x_test, y_test, names


def load_cifar10(root: str | Path, classes: Sequence[int] | None = None) -> LoadedDataset:
    """Load CIFAR-10 from its python-pickle or binary distribution directory.

    ``classes`` optionally restricts to a subset of the original label
    indices; kept classes are re-indexed in the given order.
    """
    root = Path(root)
    if (root / "data_batch_1").exists():
        x_train, y_train, x_test, y_test, names = _read_cifar_python(root)
    elif (root / "data_batch_1.bin").exists():
        x_train, y_train, x_test, y_test, names = _read_cifar_binary(root)
    else:
        raise MissingImageError(f"no CIFAR-10 batches found under {root}")

    if classes is not None:
        remap = {orig: new for new, orig in enumerate(classes)}
        keep_train = np.isin(y_train, classes)
        keep_test = np.isin(y_test, classes)
        x_train, y_train = x_train[keep_train], y_train[keep_train]
        x_test, y_test = x_test[keep_test], y_test[keep_test]
        y_train = np.asarray([remap[int(v)] for v in y_train], dtype=np.int64)
        y_test = np.asarray([remap[int(v)] for v in y_test], dtype=np.int64)
        names = [names[i] for i in classes]

    train_ids = [f"train-{i:05d}" for i in range(len(x_train))]
    test_ids = [f"test-{i:05d}" for i in range(len(x_test))]
    bank = ArrayImageBank(train_ids + test_ids, np.concatenate([x_train, x_test]))
    train = [
        Sample(id=sid, image_ref=i, true_label=int(y_train[i]))
        for i, sid in enumerate(train_ids)
    ]
    test = [
        Sample(id=sid, image_ref=i, true_label=int(y_test[i]))
        for i, sid in enumerate(test_ids)
    ]
    return LoadedDataset(train=train, test=test, class_list=tuple(names), bank=bank)


# ---------------------------------------------------------------------------
# Image folder with CSV manifest
# ---------------------------------------------------------------------------


def load_folder_manifest(
    root: str | Path,
    manifest: str | Path,
    train_fraction: float = 0.7,
    seed: int = 0,
) -> LoadedDataset:
    """Load a folder dataset described by a CSV manifest.

    Accepts either a plain ``relative_path,label`` manifest or a patch
    manifest (``patch_path,...,category``). The train/test split is
    stratified at ``train_fraction``.
    """
    root = Path(root)
    with open(manifest, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError("dataset.manifest", f"manifest {manifest} is empty")
    if "relative_path" in rows[0]:
        path_key, label_key = "relative_path", "label"
    elif "patch_path" in rows[0]:
        path_key, label_key = "patch_path", "category"
    else:
        raise ConfigError(
            "dataset.manifest",
            "manifest needs relative_path,label or patch_path,...,category columns",
        )

    class_list = tuple(sorted({row[label_key] for row in rows}))
    label_index = {name: i for i, name in enumerate(class_list)}
    paths_by_id: dict[str, str] = {}
    samples: list[Sample] = []
    for i, row in enumerate(rows):
        sid = f"img-{i:06d}"
        paths_by_id[sid] = row[path_key]
        samples.append(Sample(id=sid, image_ref=row[path_key], true_label=label_index[row[label_key]]))

    train, test = stratified_split(samples, train_fraction, seed)
    bank = FolderImageBank(root, paths_by_id)
    return LoadedDataset(train=train, test=test, class_list=class_list, bank=bank)


def load_dataset(config: DatasetConfig, split_seed: int) -> LoadedDataset:
    if config.kind == "cifar10":
        return load_cifar10(config.root, config.classes)
    if config.kind == "folder":
        return load_folder_manifest(
            config.root, config.manifest, config.train_fraction, split_seed
        )
    if config.kind == "synthetic":
        from .synthetic import SyntheticSpec, make_classification_dataset

        spec = SyntheticSpec(**config.synthetic)
        return make_classification_dataset(spec)
    raise ConfigError("dataset.kind", f"unknown dataset kind {config.kind!r}")
