"""Synthetic data generators.

Two families:

  - a classification image generator with controllable difficulty, standing
    in for image datasets in tests and demos. Each class combines a weak
    global color cue (few-shot learnable) with strong per-mode textures
    (many modes, so good recall needs diverse coverage of the class);

  - a COCO-style instance-segmentation fixture (random simple polygons over
    noise images) feeding the patch converter.
"""

from __future__ import annotations

import colorsys
import json
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from PIL import Image, ImageDraw

from .datasets import ArrayImageBank, LoadedDataset
from .pools import Sample
from .seeding import derive_seed


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs for the synthetic classification generator.

    tint_min/tint_max bound the per-sample strength of the class color cue
    and tinted_fraction is the share of samples carrying it at all (the
    rest get zero tint and are only classifiable by their mode texture);
    mode_strength scales the per-mode texture; noise_sigma is i.i.d. pixel
    noise. Few-shot recall is roughly tinted_fraction plus the covered
    share of modes, so the class gets harder as modes_per_class grows and
    tinted_fraction drops.
    """

    n_classes: int = 3
    image_size: int = 32
    modes_per_class: int = 12
    train_per_class: int = 800
    test_per_class: int = 200
    tint_min: float = 0.10
    tint_max: float = 0.35
    tinted_fraction: float = 1.0
    mode_strength: float = 0.55
    noise_sigma: float = 0.18
    pattern_grid: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.modes_per_class < 1:
            raise ValueError("modes_per_class must be positive")
        if not 0.0 <= self.tinted_fraction <= 1.0:
            raise ValueError("tinted_fraction must be in [0, 1]")


def _class_tints(n_classes: int) -> np.ndarray:
    """Zero-mean RGB directions spaced around the hue wheel."""
    tints = []
    for k in range(n_classes):
        rgb = np.array(colorsys.hsv_to_rgb(k / n_classes, 1.0, 1.0))
        direction = rgb - rgb.mean()
        tints.append(direction / np.linalg.norm(direction))
    return np.stack(tints)


def _mode_patterns(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """Low-frequency textures, one per (class, mode), values in [-1, 1]."""
    size = spec.image_size
    patterns = np.empty((spec.n_classes, spec.modes_per_class, size, size, 3), dtype=np.float32)
    for k in range(spec.n_classes):
        for m in range(spec.modes_per_class):
            coarse = rng.uniform(-1, 1, size=(spec.pattern_grid, spec.pattern_grid, 3))
            patterns[k, m] = cv2.resize(
                coarse.astype(np.float32), (size, size), interpolation=cv2.INTER_LINEAR
            )
    return patterns


def _render_split(
    spec: SyntheticSpec,
    tints: np.ndarray,
    patterns: np.ndarray,
    count_per_class: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    size = spec.image_size
    total = count_per_class * spec.n_classes
    images = np.empty((total, size, size, 3), dtype=np.uint8)
    labels = np.empty(total, dtype=np.int64)
    i = 0
    for k in range(spec.n_classes):
        for _ in range(count_per_class):
            mode = int(rng.integers(spec.modes_per_class))
            tint_amp = rng.uniform(spec.tint_min, spec.tint_max)
            if rng.random() >= spec.tinted_fraction:
                tint_amp = 0.0
            pattern = patterns[k, mode]
            # random roll decorrelates samples sharing a mode
            shift = rng.integers(0, size, size=2)
            pattern = np.roll(pattern, tuple(shift), axis=(0, 1))
            x = (
                0.5
                + tint_amp * tints[k]
                + spec.mode_strength * pattern * rng.uniform(0.7, 1.3)
                + rng.normal(0.0, spec.noise_sigma, size=(size, size, 3))
            )
            images[i] = (np.clip(x, 0.0, 1.0) * 255).astype(np.uint8)
            labels[i] = k
            i += 1
    return images, labels


def make_classification_dataset(spec: SyntheticSpec) -> LoadedDataset:
    """Generate a deterministic in-memory classification dataset."""
    rng = np.random.default_rng(derive_seed(spec.seed, "synthetic-classification"))
    tints = _class_tints(spec.n_classes)
    patterns = _mode_patterns(spec, rng)

    x_train, y_train = _render_split(spec, tints, patterns, spec.train_per_class, rng)
    x_test, y_test = _render_split(spec, tints, patterns, spec.test_per_class, rng)

    train_ids = [f"syn-train-{i:05d}" for i in range(len(x_train))]
    test_ids = [f"syn-test-{i:05d}" for i in range(len(x_test))]
    bank = ArrayImageBank(train_ids + test_ids, np.concatenate([x_train, x_test]))
    train = [
        Sample(id=sid, image_ref=i, true_label=int(y_train[i]))
        for i, sid in enumerate(train_ids)
    ]
    test = [
        Sample(id=sid, image_ref=i, true_label=int(y_test[i]))
        for i, sid in enumerate(test_ids)
    ]
    class_list = tuple(f"class{k}" for k in range(spec.n_classes))
    return LoadedDataset(train=train, test=test, class_list=class_list, bank=bank)


# ---------------------------------------------------------------------------
# COCO-style polygon fixtures
# ---------------------------------------------------------------------------


def _star_polygon(rng: np.random.Generator, cx, cy, r_min, r_max, k) -> list[float]:
    """Simple (possibly concave) polygon: radii at sorted angles around a center."""
    angles = np.sort(rng.uniform(0, 2 * np.pi, size=k))
    radii = rng.uniform(r_min, r_max, size=k)
    flat: list[float] = []
    for a, r in zip(angles, radii):
        flat.extend((float(cx + r * np.cos(a)), float(cy + r * np.sin(a))))
    return flat


def _rect_polygon(rng: np.random.Generator, cx, cy, r_min, r_max) -> list[float]:
    hw = rng.uniform(r_min, r_max)
    hh = rng.uniform(r_min, r_max)
    return [
        float(cx - hw), float(cy - hh),
        float(cx + hw), float(cy - hh),
        float(cx + hw), float(cy + hh),
        float(cx - hw), float(cy + hh),
    ]


def make_coco_payload(
    n_images: int,
    categories: tuple[str, ...] = ("crack", "spalling", "algae"),
    seed: int = 0,
    width_range: tuple[int, int] = (360, 560),
    height_range: tuple[int, int] = (280, 440),
    instances_range: tuple[int, int] = (0, 8),
    radius_range: tuple[float, float] = (18.0, 70.0),
) -> dict:
    """Build a COCO-style dict of random simple polygons over random images.

    A slice of images gets zero instances so the background-only path is
    exercised.
    """
    rng = np.random.default_rng(derive_seed(seed, "coco-fixture"))
    images = []
    annotations = []
    ann_id = 1
    for img_id in range(1, n_images + 1):
        w = int(rng.integers(*width_range))
        h = int(rng.integers(*height_range))
        images.append(
            {"id": img_id, "file_name": f"img_{img_id:04d}.png", "width": w, "height": h}
        )
        n_inst = int(rng.integers(instances_range[0], instances_range[1] + 1))
        for _ in range(n_inst):
            r_max = float(rng.uniform(*radius_range))
            margin = r_max + 2.0
            if 2 * margin >= min(w, h):
                continue
            cx = rng.uniform(margin, w - margin)
            cy = rng.uniform(margin, h - margin)
            if rng.random() < 0.3:
                flat = _rect_polygon(rng, cx, cy, r_max * 0.4, r_max)
            else:
                flat = _star_polygon(rng, cx, cy, r_max * 0.35, r_max, int(rng.integers(4, 9)))
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": img_id,
                    "category_id": int(rng.integers(1, len(categories) + 1)),
                    "segmentation": [flat],
                    "iscrowd": 0,
                }
            )
            ann_id += 1
    return {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": i + 1, "name": name} for i, name in enumerate(categories)],
    }


def write_coco_fixture(
    out_dir: str | Path,
    n_images: int = 10,
    categories: tuple[str, ...] = ("crack", "spalling", "algae"),
    seed: int = 0,
    **payload_kwargs,
) -> tuple[Path, Path]:
    """Write a rendered COCO fixture: images directory plus annotations.json.

    Polygons are painted in a per-category color over a noise background, so
    the extracted patches carry a visual class signal.
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    payload = make_coco_payload(n_images, categories, seed, **payload_kwargs)
    ann_file = out_dir / "annotations.json"
    ann_file.write_text(json.dumps(payload))

    palette = {
        name: tuple(int(c * 255) for c in colorsys.hsv_to_rgb(i / len(categories), 0.8, 0.9))
        for i, name in enumerate(categories)
    }
    cat_names = {c["id"]: c["name"] for c in payload["categories"]}
    by_image: dict[int, list[dict]] = {}
    for ann in payload["annotations"]:
        by_image.setdefault(ann["image_id"], []).append(ann)

    rng = np.random.default_rng(derive_seed(seed, "coco-render"))
    for rec in payload["images"]:
        noise = rng.integers(90, 150, size=(rec["height"], rec["width"], 3), dtype=np.uint8)
        img = Image.fromarray(noise, "RGB")
        draw = ImageDraw.Draw(img)
        for ann in by_image.get(rec["id"], []):
            flat = ann["segmentation"][0]
            points = list(zip(flat[0::2], flat[1::2]))
            draw.polygon(points, fill=palette[cat_names[ann["category_id"]]])
        img.save(images_dir / rec["file_name"])
    return ann_file, images_dir
