"""Imbalance-aware training: minority oversampling, per-sample image
augmentation, MixUp/CutMix batch augmentation, and soft-label cross-entropy.
Also deterministic and MC-dropout inference over trained models.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import cv2
import numpy as np
import torch
import torch.nn.functional as F

from .errors import (
    BatchTooSmallError,
    EmptyClassError,
    EmptyInputError,
    MissingMinorityError,
)
from .models import build_backbone, dropout_rates_nonzero, set_mc_dropout
from .seeding import derive_seed

logger = logging.getLogger(__name__)

DISCRIMINATOR_CLASSES = ("majority", "minority")


@dataclass(frozen=True)
class AugmentConfig:
    """Per-sample augmentation draws; each family applies independently."""

    flip_p: float = 0.5
    affine_p: float = 0.5
    shift_limit: float = 0.10
    scale_limit: float = 0.10
    rotate_limit: float = 15.0
    color_p: float = 0.5
    brightness_limit: float = 0.2
    contrast_limit: float = 0.2

    def __post_init__(self):
        for name in ("flip_p", "affine_p", "color_p"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


@dataclass(frozen=True)
class TrainConfig:
    backbone: str = "resnet18-first-block"
    epochs: int = 50
    learning_rate: float = 5e-4
    weight_decay: float = 0.01
    optimizer: str = "adamw"
    batch_size: int = 128
    stage_dropout: float = 0.25
    head_dropout: float = 0.5
    mixup_alpha: float = 0.2
    cutmix_alpha: float = 1.0
    batch_aug_prob: float = 0.5
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    mc_passes: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.optimizer != "adamw":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")
        for name in ("stage_dropout", "head_dropout", "batch_aug_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.mc_passes < 1:
            raise ValueError("mc_passes must be >= 1")


@dataclass
class TrainedModel:
    net: torch.nn.Module
    class_list: tuple[str, ...]
    backbone: str
    seed: int
    small_input: bool


# ---------------------------------------------------------------------------
# Oversampling
# ---------------------------------------------------------------------------


def oversample_balance(
    samples: Sequence[tuple], rng: np.random.Generator
) -> list[tuple]:
    """Duplicate every present class up to the largest class count.

    Each class is repeated whole floor(max/n) times; the remainder is a
    uniform draw without replacement, so every original sample appears at
    least once.
    """
    if not samples:
        raise EmptyInputError("nothing to oversample")
    groups: dict[int, list[tuple]] = {}
    for item in samples:
        groups.setdefault(item[1], []).append(item)
    target = max(len(g) for g in groups.values())
    out: list[tuple] = []
    for label in sorted(groups):
        members = groups[label]
        reps, extra = divmod(target, len(members))
        out.extend(members * reps)
        if extra:
            chosen = rng.choice(len(members), size=extra, replace=False)
            out.extend(members[i] for i in chosen)
    return out


# ---------------------------------------------------------------------------
# Per-sample image augmentation
# ---------------------------------------------------------------------------


def augment_sample(
    image: np.ndarray,
    rng: np.random.Generator,
    config: AugmentConfig = AugmentConfig(),
) -> np.ndarray:
    """Random flip / shift / scale / rotate / brightness-contrast.

    Input and output are HxWxC uint8 with identical dimensions.
    """
    out = image
    h, w = out.shape[:2]

    if rng.random() < config.flip_p:
        out = out[:, ::-1]

    if rng.random() < config.affine_p:
        angle = rng.uniform(-config.rotate_limit, config.rotate_limit)
        scale = 1.0 + rng.uniform(-config.scale_limit, config.scale_limit)
        dx = rng.uniform(-config.shift_limit, config.shift_limit) * w
        dy = rng.uniform(-config.shift_limit, config.shift_limit) * h
        matrix = cv2.getRotationMatrix2D((w / 2 - 0.5, h / 2 - 0.5), angle, scale)
        matrix[0, 2] += dx
        matrix[1, 2] += dy
        out = cv2.warpAffine(
            np.ascontiguousarray(out),
            matrix,
            (w, h),
            flags=cv2.INTER_LINEAR,
            borderMode=cv2.BORDER_REFLECT_101,
        )

    if rng.random() < config.color_p:
        brightness = rng.uniform(-config.brightness_limit, config.brightness_limit)
        contrast = 1.0 + rng.uniform(-config.contrast_limit, config.contrast_limit)
        scaled = (out.astype(np.float32) / 255.0 - 0.5) * contrast + 0.5 + brightness
        out = (np.clip(scaled, 0.0, 1.0) * 255.0).astype(np.uint8)

    return np.ascontiguousarray(out)


# ---------------------------------------------------------------------------
# Batch augmentation (MixUp / CutMix)
# ---------------------------------------------------------------------------


def apply_mixup(
    images: torch.Tensor, soft_labels: torch.Tensor, perm: np.ndarray, lam: float
) -> tuple[torch.Tensor, torch.Tensor]:
    idx = torch.as_tensor(np.ascontiguousarray(perm), dtype=torch.long)
    mixed = lam * images + (1.0 - lam) * images[idx]
    labels = lam * soft_labels + (1.0 - lam) * soft_labels[idx]
    return mixed, labels


def cutmix_box(
    width: int, height: int, lam: float, rng: np.random.Generator
) -> tuple[int, int, int, int]:
    """Rectangle of area ratio ~ (1 - lam), clipped to the image."""
    ratio = float(np.sqrt(1.0 - lam))
    cut_w, cut_h = int(width * ratio), int(height * ratio)
    cx, cy = int(rng.integers(width)), int(rng.integers(height))
    x0 = max(cx - cut_w // 2, 0)
    y0 = max(cy - cut_h // 2, 0)
    x1 = min(cx + (cut_w - cut_w // 2), width)
    y1 = min(cy + (cut_h - cut_h // 2), height)
    return x0, y0, x1, y1


def apply_cutmix(
    images: torch.Tensor,
    soft_labels: torch.Tensor,
    perm: np.ndarray,
    box: tuple[int, int, int, int],
) -> tuple[torch.Tensor, torch.Tensor]:
    x0, y0, x1, y1 = box
    idx = torch.as_tensor(np.ascontiguousarray(perm), dtype=torch.long)
    out = images.clone()
    out[:, :, y0:y1, x0:x1] = images[idx][:, :, y0:y1, x0:x1]
    h, w = images.shape[2], images.shape[3]
    pasted = (x1 - x0) * (y1 - y0) / (w * h)
    labels = (1.0 - pasted) * soft_labels + pasted * soft_labels[idx]
    return out, labels


def batch_augment(
    images: torch.Tensor,
    soft_labels: torch.Tensor,
    rng: np.random.Generator,
    mixup_alpha: float = 0.2,
    cutmix_alpha: float = 1.0,
    prob: float = 0.5,
) -> tuple[torch.Tensor, torch.Tensor]:
    """With probability ``prob`` apply MixUp or CutMix (fair coin) to the
    whole batch, mixing labels accordingly; otherwise pass through.
    """
    if images.shape[0] < 2:
        raise BatchTooSmallError(f"batch of {images.shape[0]} cannot be pair-mixed")
    if rng.random() >= prob:
        return images, soft_labels
    perm = rng.permutation(images.shape[0])
    if rng.random() < 0.5:
        lam = float(rng.beta(mixup_alpha, mixup_alpha))
        return apply_mixup(images, soft_labels, perm, lam)
    lam = float(rng.beta(cutmix_alpha, cutmix_alpha))
    box = cutmix_box(images.shape[3], images.shape[2], lam, rng)
    return apply_cutmix(images, soft_labels, perm, box)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def _to_tensor(images: np.ndarray) -> torch.Tensor:
    """uint8 NHWC -> float NCHW in [-1, 1]."""
    x = torch.from_numpy(np.ascontiguousarray(images)).float().div_(255.0)
    return x.permute(0, 3, 1, 2).sub_(0.5).div_(0.5)


def _soft_cross_entropy(logits: torch.Tensor, soft_labels: torch.Tensor) -> torch.Tensor:
    return -(soft_labels * F.log_softmax(logits, dim=1)).sum(dim=1).mean()


def _fit(
    images: np.ndarray,
    labels: np.ndarray,
    class_list: tuple[str, ...],
    config: TrainConfig,
) -> TrainedModel:
    num_classes = len(class_list)
    small_input = min(images.shape[1], images.shape[2]) < 64

    torch.manual_seed(derive_seed(config.seed, "weights"))
    net = build_backbone(
        config.backbone, num_classes, small_input,
        config.stage_dropout, config.head_dropout,
    )
    optimizer = torch.optim.AdamW(
        net.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )

    rng = np.random.default_rng(derive_seed(config.seed, "augmentation"))
    balanced = oversample_balance(list(zip(range(len(labels)), labels.tolist())), rng)
    indices = np.array([i for i, _ in balanced])
    eye = np.eye(num_classes, dtype=np.float32)

    net.train()
    for epoch in range(config.epochs):
        order = rng.permutation(len(indices))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch_idx = indices[order[start : start + config.batch_size]]
            batch_images = np.stack(
                [augment_sample(images[i], rng, config.augment) for i in batch_idx]
            )
            x = _to_tensor(batch_images)
            y = torch.from_numpy(eye[labels[batch_idx]])
            if x.shape[0] >= 2:
                x, y = batch_augment(
                    x, y, rng,
                    mixup_alpha=config.mixup_alpha,
                    cutmix_alpha=config.cutmix_alpha,
                    prob=config.batch_aug_prob,
                )
            optimizer.zero_grad()
            loss = _soft_cross_entropy(net(x), y)
            loss.backward()
            optimizer.step()
            epoch_loss += loss.detach().item() * x.shape[0]
        logger.debug("epoch %d/%d loss %.4f", epoch + 1, config.epochs,
                     epoch_loss / len(indices))

    net.eval()
    return TrainedModel(
        net=net,
        class_list=class_list,
        backbone=config.backbone,
        seed=config.seed,
        small_input=small_input,
    )


def train_classifier(
    images: np.ndarray,
    labels: Sequence[int],
    class_list: Sequence[str],
    config: TrainConfig,
) -> TrainedModel:
    """Train the multi-class task model on the labeled pool."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) == 0:
        raise EmptyInputError("no labeled samples")
    present = set(labels.tolist())
    missing = [name for i, name in enumerate(class_list) if i not in present]
    if missing:
        raise EmptyClassError(f"no labeled samples for class(es): {', '.join(missing)}")
    return _fit(images, labels, tuple(class_list), config)


def train_discriminator(
    images: np.ndarray,
    labels: Sequence[int],
    minority_class: int,
    config: TrainConfig,
) -> TrainedModel:
    """Train the one-vs-all binary discriminator (minority = positive).

    Labels are binarized, positives are oversampled to balance, and the
    exact multi-class recipe is reused with a two-logit head. Retrain it
    from scratch every cycle on the current labeled pool.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) == 0:
        raise EmptyInputError("no labeled samples")
    binary = (labels == minority_class).astype(np.int64)
    if binary.sum() == 0:
        raise MissingMinorityError("labeled pool holds no minority sample")
    if binary.sum() == len(binary):
        raise EmptyClassError("labeled pool holds no majority sample")
    return _fit(images, binary, DISCRIMINATOR_CLASSES, config)


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------


@torch.no_grad()
def predict_probs(
    model: TrainedModel, images: np.ndarray, batch_size: int = 256
) -> np.ndarray:
    """Deterministic softmax probabilities (dropout disabled), N x C."""
    model.net.eval()
    chunks = []
    for start in range(0, len(images), batch_size):
        x = _to_tensor(images[start : start + batch_size])
        chunks.append(F.softmax(model.net(x), dim=1).numpy())
    return np.concatenate(chunks) if chunks else np.empty((0, len(model.class_list)))


@torch.no_grad()
def mc_dropout_predict(
    model: TrainedModel,
    images: np.ndarray,
    t: int,
    seed: int | None = None,
    batch_size: int = 256,
) -> np.ndarray:
    """T stochastic forward passes with dropout active; returns T x N x C.

    With all dropout rates at zero the passes are identical and the result
    reduces to the deterministic prediction.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if not dropout_rates_nonzero(model.net):
        logger.warning("mc_dropout_predict on a model without active dropout sites")
    model.net.eval()
    set_mc_dropout(model.net, True)
    if seed is not None:
        torch.manual_seed(seed)
    passes = []
    for _ in range(t):
        chunks = []
        for start in range(0, len(images), batch_size):
            x = _to_tensor(images[start : start + batch_size])
            chunks.append(F.softmax(model.net(x), dim=1).numpy())
        passes.append(np.concatenate(chunks))
    set_mc_dropout(model.net, False)
    return np.stack(passes)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(model: TrainedModel, path: str | Path, config_hash: str = "") -> None:
    """Write model weights plus a JSON sidecar describing the run."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(model.net.state_dict(), path)
    sidecar = {
        "class_list": list(model.class_list),
        "backbone": model.backbone,
        "seed": model.seed,
        "small_input": model.small_input,
        "config_hash": config_hash,
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_checkpoint(path: str | Path, config: TrainConfig | None = None) -> TrainedModel:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    stage_dropout = config.stage_dropout if config else 0.25
    head_dropout = config.head_dropout if config else 0.5
    net = build_backbone(
        sidecar["backbone"], len(sidecar["class_list"]), sidecar["small_input"],
        stage_dropout, head_dropout,
    )
    net.load_state_dict(torch.load(path, weights_only=True))
    net.eval()
    return TrainedModel(
        net=net,
        class_list=tuple(sidecar["class_list"]),
        backbone=sidecar["backbone"],
        seed=sidecar["seed"],
        small_input=sidecar["small_input"],
    )
