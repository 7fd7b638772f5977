"""Patch-based conversion of a polygon-annotated dataset into a fixed-size
patch classification dataset.

Patches are drawn by rejection sampling. A candidate patch is dropped when
it overlaps an already accepted patch of the same image, when it cuts into
an annotation of a different category, or when it sticks out of the image.
Class-patch centers must fall inside the instance polygon; patches sampled
from annotation-free space form the synthetic "Background" class.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from PIL import Image

from .errors import MalformedAnnotationError, MissingImageError
from .geometry import (
    point_in_polygon,
    rect_intersects_polygon,
    rects_overlap,
    ring_bbox,
)
from .seeding import derive_seed

logger = logging.getLogger(__name__)

BACKGROUND_CATEGORY = "Background"

MANIFEST_FIELDS = ("patch_path", "source_image", "cx", "cy", "category")


@dataclass(frozen=True)
class InstanceAnnotation:
    """One annotated instance: closed vertex rings plus its category."""

    image_id: str
    category: str
    rings: tuple[tuple[tuple[float, float], ...], ...]

    def __post_init__(self):
        if not self.rings:
            raise MalformedAnnotationError(f"annotation on {self.image_id!r} has no rings")
        for ring in self.rings:
            if len(ring) < 3:
                raise MalformedAnnotationError(
                    f"ring with {len(ring)} vertices on image {self.image_id!r}"
                )

    def bbox(self) -> tuple[float, float, float, float]:
        return ring_bbox(self.rings)

    def contains(self, x: float, y: float) -> bool:
        return point_in_polygon(x, y, self.rings)


@dataclass(frozen=True)
class PatchSpec:
    """An axis-aligned square window with its assigned category.

    A patch of side ``size`` centered at integer (cx, cy) covers the
    half-open square [cx - size//2, cx - size//2 + size) in each axis.
    """

    image_id: str
    cx: int
    cy: int
    size: int
    category: str

    def bounds(self) -> tuple[int, int, int, int]:
        x0 = self.cx - self.size // 2
        y0 = self.cy - self.size // 2
        return x0, y0, x0 + self.size, y0 + self.size


@dataclass(frozen=True)
class PatchifyConfig:
    patch_size: int = 160
    class_patches_per_image: int = 100
    background_patches_per_image: int = 10
    attempts_per_patch: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("patch_size", "class_patches_per_image",
                     "background_patches_per_image", "attempts_per_patch"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class RejectReason(Enum):
    OVERLAP = "overlap"
    FOREIGN_CLASS = "foreign_class"
    OUT_OF_BOUNDS = "out_of_bounds"


def validate_patch(
    candidate: PatchSpec,
    accepted: Sequence[PatchSpec],
    annotations: Sequence[InstanceAnnotation],
    image_dims: tuple[int, int],
) -> RejectReason | None:
    """Apply the three rejection criteria; None means the candidate is valid.

    For Background candidates every instance annotation counts as a foreign
    category.
    """
    rect = candidate.bounds()

    for other in accepted:
        if rects_overlap(rect, other.bounds()):
            return RejectReason.OVERLAP

    for ann in annotations:
        if ann.category != candidate.category:
            if rect_intersects_polygon(rect, ann.rings):
                return RejectReason.FOREIGN_CLASS

    w, h = image_dims
    x0, y0, x1, y1 = rect
    if x0 < 0 or y0 < 0 or x1 > w or y1 > h:
        return RejectReason.OUT_OF_BOUNDS

    return None


def _sample_patches(
    category: str,
    image_id: str,
    center_sampler,
    count: int,
    accepted: list[PatchSpec],
    annotations: Sequence[InstanceAnnotation],
    image_dims: tuple[int, int],
    config: PatchifyConfig,
    reject_counts: Counter,
) -> list[PatchSpec]:
    """Fill up to ``count`` patch slots, each with its own attempt budget."""
    emitted: list[PatchSpec] = []
    for _ in range(count):
        for _ in range(config.attempts_per_patch):
            center = center_sampler()
            if center is None:
                reject_counts["center_outside"] += 1
                continue
            cx, cy = center
            candidate = PatchSpec(image_id, cx, cy, config.patch_size, category)
            reason = validate_patch(candidate, accepted, annotations, image_dims)
            if reason is None:
                accepted.append(candidate)
                emitted.append(candidate)
                break
            reject_counts[reason.value] += 1
    return emitted


def patchify_image(
    image_annotations: Sequence[InstanceAnnotation],
    image_dims: tuple[int, int],
    config: PatchifyConfig,
    rng: np.random.Generator,
    reject_counts: Counter | None = None,
    image_id: str | None = None,
) -> list[PatchSpec]:
    """Sample class patches and background patches for one image.

    The class-patch budget is spent round-robin over the image's instances
    in a seeded random order. Class-patch centers are drawn from the
    instance's bounding box and must land inside the polygon; background
    centers are drawn anywhere in the image. Every accepted patch has passed
    ``validate_patch`` against all patches accepted before it.
    """
    if reject_counts is None:
        reject_counts = Counter()
    w, h = image_dims
    accepted: list[PatchSpec] = []
    out: list[PatchSpec] = []

    anns = list(image_annotations)
    if anns:
        order = rng.permutation(len(anns))
        for slot in range(config.class_patches_per_image):
            ann = anns[order[slot % len(anns)]]
            x0, y0, x1, y1 = ann.bbox()
            lo_x, hi_x = math.ceil(x0), math.floor(x1)
            lo_y, hi_y = math.ceil(y0), math.floor(y1)
            if lo_x > hi_x or lo_y > hi_y:
                reject_counts["empty_bbox"] += 1
                continue

            def draw_center(ann=ann, lo_x=lo_x, hi_x=hi_x, lo_y=lo_y, hi_y=hi_y):
                cx = int(rng.integers(lo_x, hi_x + 1))
                cy = int(rng.integers(lo_y, hi_y + 1))
                return (cx, cy) if ann.contains(cx, cy) else None

            out.extend(
                _sample_patches(
                    ann.category, ann.image_id, draw_center, 1,
                    accepted, anns, image_dims, config, reject_counts,
                )
            )

    if image_id is None:
        image_id = anns[0].image_id if anns else ""

    def draw_background():
        return int(rng.integers(0, w)), int(rng.integers(0, h))

    out.extend(
        _sample_patches(
            BACKGROUND_CATEGORY, image_id, draw_background,
            config.background_patches_per_image,
            accepted, anns, image_dims, config, reject_counts,
        )
    )
    return out


# ---------------------------------------------------------------------------
# COCO-style input
# ---------------------------------------------------------------------------


def parse_coco(payload: Mapping) -> tuple[list[dict], dict[str, list[InstanceAnnotation]]]:
    """Parse a COCO-style dict into image records and per-image annotations.

    Returns (images, annotations_by_image_id); image ids are normalized to
    strings. Raises MalformedAnnotationError / MissingImageError on broken
    records.
    """
    categories = {}
    for cat in payload.get("categories", []):
        try:
            categories[cat["id"]] = cat["name"]
        except (KeyError, TypeError) as exc:
            raise MalformedAnnotationError(f"bad category record: {cat!r}") from exc

    images = []
    image_ids = set()
    for rec in payload.get("images", []):
        try:
            images.append(
                {
                    "id": str(rec["id"]),
                    "file_name": rec["file_name"],
                    "width": int(rec["width"]),
                    "height": int(rec["height"]),
                }
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedAnnotationError(f"bad image record: {rec!r}") from exc
        image_ids.add(images[-1]["id"])

    by_image: dict[str, list[InstanceAnnotation]] = {img["id"]: [] for img in images}
    dims = {img["id"]: (img["width"], img["height"]) for img in images}
    for ann in payload.get("annotations", []):
        ann_id = ann.get("id", "?")
        image_id = str(ann.get("image_id"))
        if image_id not in image_ids:
            raise MissingImageError(
                f"annotation {ann_id} references unknown image {image_id!r}"
            )
        if ann.get("category_id") not in categories:
            raise MalformedAnnotationError(
                f"annotation {ann_id} has unknown category {ann.get('category_id')!r}"
            )
        segmentation = ann.get("segmentation")
        if not isinstance(segmentation, list) or not segmentation:
            raise MalformedAnnotationError(f"annotation {ann_id} has no polygon segmentation")
        rings = []
        for flat in segmentation:
            if not isinstance(flat, list) or len(flat) < 6 or len(flat) % 2 != 0:
                raise MalformedAnnotationError(
                    f"annotation {ann_id}: segmentation ring must be a flat "
                    f"[x0, y0, x1, y1, ...] list with >= 3 vertices"
                )
            ring = tuple((float(flat[i]), float(flat[i + 1])) for i in range(0, len(flat), 2))
            w, h = dims[image_id]
            for x, y in ring:
                if not (0 <= x <= w and 0 <= y <= h):
                    raise MalformedAnnotationError(
                        f"annotation {ann_id}: vertex ({x}, {y}) outside image {image_id}"
                    )
            rings.append(ring)
        by_image[image_id].append(
            InstanceAnnotation(
                image_id=image_id,
                category=categories[ann["category_id"]],
                rings=tuple(rings),
            )
        )
    return images, by_image


def patchify_dataset(
    annotation_file: str | Path,
    images_dir: str | Path,
    out_dir: str | Path,
    config: PatchifyConfig,
) -> tuple[list[dict], dict]:
    """Convert a COCO-style dataset into cropped patch images plus a manifest.

    Writes one lossless PNG per accepted patch under out_dir/patches/, the
    manifest CSV at out_dir/manifest.csv, and sampling statistics at
    out_dir/stats.json. Deterministic for a fixed config: each image gets
    its own generator seeded from (config.seed, image_id), and the manifest
    is written in image-id order.

    Returns (manifest_rows, stats).
    """
    annotation_file = Path(annotation_file)
    images_dir = Path(images_dir)
    out_dir = Path(out_dir)
    payload = json.loads(annotation_file.read_text())
    images, by_image = parse_coco(payload)

    patches_dir = out_dir / "patches"
    patches_dir.mkdir(parents=True, exist_ok=True)

    rows: list[dict] = []
    reject_counts: Counter = Counter()
    class_counts: Counter = Counter()
    requested = 0

    def _sort_key(img):
        return (0, int(img["id"])) if img["id"].isdigit() else (1, img["id"])

    for img in sorted(images, key=_sort_key):
        src = images_dir / img["file_name"]
        if not src.exists():
            raise MissingImageError(f"image file not found: {src}")
        anns = by_image[img["id"]]
        dims = (img["width"], img["height"])
        rng = np.random.default_rng(derive_seed(config.seed, img["id"]))
        patches = patchify_image(anns, dims, config, rng, reject_counts, image_id=img["id"])
        requested += config.class_patches_per_image * bool(anns)
        requested += config.background_patches_per_image

        with Image.open(src) as pil:
            pil = pil.convert("RGB")
            if pil.size != dims:
                raise MalformedAnnotationError(
                    f"image {img['id']}: file is {pil.size}, annotations say {dims}"
                )
            for patch in patches:
                x0, y0, x1, y1 = patch.bounds()
                crop = pil.crop((x0, y0, x1, y1))
                name = f"{img['id']}_{patch.cx}_{patch.cy}.png"
                rel = Path("patches") / patch.category / name
                (out_dir / rel).parent.mkdir(parents=True, exist_ok=True)
                crop.save(out_dir / rel)
                class_counts[patch.category] += 1
                rows.append(
                    {
                        "patch_path": str(rel),
                        "source_image": img["file_name"],
                        "cx": patch.cx,
                        "cy": patch.cy,
                        "category": patch.category,
                    }
                )

    stats = {
        "patch_count": len(rows),
        "requested_patches": requested,
        "per_class_counts": dict(sorted(class_counts.items())),
        "rejections": dict(sorted(reject_counts.items())),
        "config": {
            "patch_size": config.patch_size,
            "class_patches_per_image": config.class_patches_per_image,
            "background_patches_per_image": config.background_patches_per_image,
            "attempts_per_patch": config.attempts_per_patch,
            "seed": config.seed,
        },
    }
    write_manifest(rows, out_dir / "manifest.csv")
    (out_dir / "stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True))
    logger.info("patchified %d images -> %d patches", len(images), len(rows))
    return rows, stats


# ---------------------------------------------------------------------------
# Manifest handling
# ---------------------------------------------------------------------------


def write_manifest(rows: Sequence[Mapping], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in MANIFEST_FIELDS})


def read_manifest(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["cx"] = int(row["cx"])
        row["cy"] = int(row["cy"])
    return rows


def filter_classes(
    manifest: Sequence[Mapping],
    min_samples: int = 0,
    drop_classes: Sequence[str] = (),
) -> list[dict]:
    """Drop rows of classes below ``min_samples`` or explicitly listed."""
    counts = Counter(row["category"] for row in manifest)
    dropped = set(drop_classes)
    return [
        dict(row)
        for row in manifest
        if counts[row["category"]] >= min_samples and row["category"] not in dropped
    ]
