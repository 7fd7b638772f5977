import os
import pickle
from pathlib import Path

import numpy as np
import pytest


def class_colored_images(labels, size=32, seed=0):
    """Images whose mean color identifies the class (plus noise)."""
    rng = np.random.default_rng(seed)
    palette = rng.integers(40, 220, size=(10, 3))
    images = np.empty((len(labels), size, size, 3), dtype=np.uint8)
    for i, label in enumerate(labels):
        base = palette[label][None, None, :]
        noise = rng.integers(-30, 31, size=(size, size, 3))
        images[i] = np.clip(base + noise, 0, 255).astype(np.uint8)
    return images


def write_fake_cifar_python(root: Path, train_per_class=20, test_per_class=8, seed=0):
    """CIFAR-10 python-pickle distribution layout with synthetic images."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    def build_split(per_class):
        labels = np.repeat(np.arange(10), per_class)
        rng.shuffle(labels)
        images = class_colored_images(labels, seed=seed + 1)
        data = images.transpose(0, 3, 1, 2).reshape(len(labels), -1)
        return data, labels

    train_data, train_labels = build_split(train_per_class)
    per_batch = len(train_labels) // 5
    for b in range(5):
        sl = slice(b * per_batch, (b + 1) * per_batch)
        with open(root / f"data_batch_{b + 1}", "wb") as fh:
            pickle.dump(
                {b"data": train_data[sl], b"labels": train_labels[sl].tolist()}, fh
            )
    test_data, test_labels = build_split(test_per_class)
    with open(root / "test_batch", "wb") as fh:
        pickle.dump({b"data": test_data, b"labels": test_labels.tolist()}, fh)
    names = [
        b"airplane", b"automobile", b"bird", b"cat", b"deer",
        b"dog", b"frog", b"horse", b"ship", b"truck",
    ]
    with open(root / "batches.meta", "wb") as fh:
        pickle.dump({b"label_names": names}, fh)
    return root


def write_fake_cifar_binary(root: Path, train_per_class=20, test_per_class=8, seed=0):
    """CIFAR-10 binary distribution layout (1 label byte + 3072 data bytes)."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    def build_split(per_class):
        labels = np.repeat(np.arange(10), per_class).astype(np.uint8)
        rng.shuffle(labels)
        images = class_colored_images(labels, seed=seed + 1)
        data = images.transpose(0, 3, 1, 2).reshape(len(labels), -1)
        return np.concatenate([labels[:, None], data], axis=1).astype(np.uint8)

    records = build_split(train_per_class)
    per_batch = len(records) // 5
    for b in range(5):
        records[b * per_batch : (b + 1) * per_batch].tofile(
            root / f"data_batch_{b + 1}.bin"
        )
    build_split(test_per_class).tofile(root / "test_batch.bin")
    (root / "batches.meta.txt").write_text(
        "\n".join(
            ["airplane", "automobile", "bird", "cat", "deer",
             "dog", "frog", "horse", "ship", "truck"]
        )
        + "\n"
    )
    return root


def find_cifar10() -> Path | None:
    """Locate a real CIFAR-10 copy for the paper-scale checks."""
    candidates = []
    env = os.environ.get("ALBENCH_CIFAR10_DIR")
    if env:
        candidates.append(Path(env))
    candidates.append(Path(__file__).resolve().parents[1] / "data" / "cifar-10-batches-py")
    candidates.append(Path(__file__).resolve().parents[1] / "data" / "cifar-10-batches-bin")
    for path in candidates:
        if path.is_dir() and (
            (path / "data_batch_1").exists() or (path / "data_batch_1.bin").exists()
        ):
            return path
    return None


@pytest.fixture
def tiny_experiment_dict():
    """Smallest sensible experiment config as a JSON-style dict."""
    return {
        "name": "tiny",
        "dataset": {
            "kind": "synthetic",
            "synthetic": {
                "n_classes": 3,
                "image_size": 12,
                "modes_per_class": 2,
                "train_per_class": 40,
                "test_per_class": 15,
                "seed": 5,
            },
        },
        "imbalance": {
            "labeled_minority_count": 3,
            "labeled_majority_count_per_class": 8,
            "unlabeled_minority_count": 6,
            "unlabeled_majority_count_per_class": 16,
        },
        "method": {"tag": "random"},
        "train": {
            "epochs": 1,
            "batch_size": 32,
            "mc_passes": 3,
            "augment": {"affine_p": 0.25},
        },
        "cycles": 2,
        "samples_per_cycle": 6,
        "minority_rotation": [0],
        "repeats": 1,
        "seed": 123,
    }
