"""Acquisition scoring and top-K selection.

MC-based scores consume a T x N x C tensor of per-pass class probabilities.
All entropies are in nats. Higher score = more preferred for labeling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, KTooLargeError

METHODS = ("random", "entropy", "bald", "variation-ratio", "discriminator")


class AcquisitionScore(NamedTuple):
    sample_id: str
    score: float


@dataclass(frozen=True)
class AcquisitionMethod:
    """Which scoring rule drives selection, plus its knobs.

    mc_passes is used by the MC methods (entropy, bald, variation-ratio);
    discriminator_mc_dropout switches the discriminator from deterministic
    inference to dropout-averaged inference.
    """

    tag: str = "random"
    mc_passes: int = 20
    discriminator_mc_dropout: bool = False

    def __post_init__(self):
        if self.tag not in METHODS:
            raise ConfigError("method.tag", f"unknown acquisition method {self.tag!r}")
        if self.mc_passes < 1:
            raise ConfigError("method.mc_passes", "must be >= 1")


def validate_mc_probs(mc: np.ndarray, atol: float = 1e-6) -> np.ndarray:
    """Check shape T x N x C, entries in [0, 1], rows summing to 1."""
    mc = np.asarray(mc, dtype=np.float64)
    if mc.ndim != 3:
        raise ValueError(f"MC probabilities must be T x N x C, got shape {mc.shape}")
    if mc.size and (mc.min() < -atol or mc.max() > 1 + atol):
        raise ValueError("MC probabilities outside [0, 1]")
    sums = mc.sum(axis=2)
    if mc.size and not np.allclose(sums, 1.0, atol=atol):
        raise ValueError("MC probability rows do not sum to 1")
    return mc


def _entropy(p: np.ndarray) -> np.ndarray:
    """Shannon entropy in nats along the last axis, with 0 * ln 0 = 0."""
    return -np.sum(np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0), axis=-1)


def entropy_scores(mc: np.ndarray) -> np.ndarray:
    """Entropy of the MC-mean predictive distribution, per sample."""
    mc = validate_mc_probs(mc)
    return _entropy(mc.mean(axis=0))


def bald_scores(mc: np.ndarray) -> np.ndarray:
    """Mutual information between prediction and parameters, MC-estimated:
    entropy of the mean minus mean of the per-pass entropies. Clamped at 0
    to absorb negative rounding.
    """
    mc = validate_mc_probs(mc)
    predictive = _entropy(mc.mean(axis=0))
    expected = _entropy(mc).mean(axis=0)
    return np.maximum(predictive - expected, 0.0)


def variation_ratio_scores(mc: np.ndarray) -> np.ndarray:
    """1 - (modal argmax frequency over passes) / T; argmax ties take the
    lowest class index."""
    mc = validate_mc_probs(mc)
    t, n, c = mc.shape
    votes = mc.argmax(axis=2)  # T x N
    scores = np.empty(n)
    for i in range(n):
        counts = np.bincount(votes[:, i], minlength=c)
        scores[i] = 1.0 - counts.max() / t
    return scores


def random_scores(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(size=n)


def discriminator_scores(probs: np.ndarray) -> np.ndarray:
    """Positive-class (minority) probability from the binary discriminator.

    ``probs`` is the N x 2 output of a forward pass; column 1 is positive.
    """
    probs = np.asarray(probs)
    if probs.ndim != 2 or probs.shape[1] != 2:
        raise ValueError(f"discriminator output must be N x 2, got {probs.shape}")
    return probs[:, 1].astype(np.float64)


def attach_ids(ids: Sequence[str], values: np.ndarray) -> list[AcquisitionScore]:
    if len(ids) != len(values):
        raise ValueError("ids/scores length mismatch")
    if not np.all(np.isfinite(values)):
        raise ValueError("scores must be finite")
    return [AcquisitionScore(sid, float(v)) for sid, v in zip(ids, values)]


def select_top_k(scores: Sequence[AcquisitionScore], k: int) -> list[str]:
    """Exactly k ids with the highest scores; ties broken by ascending id."""
    if k > len(scores):
        raise KTooLargeError(f"asked for {k} of {len(scores)} scored samples")
    ranked = sorted(scores, key=lambda s: (-s.score, s.sample_id))
    return [s.sample_id for s in ranked[:k]]
