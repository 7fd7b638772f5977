"""Active-learning pool simulation: stratified split, artificial imbalance,
labeled/unlabeled/unused pools, simulated oracle, and replenishment.

All operations are functional: they return a new ``PoolState`` and never
mutate the one passed in, so snapshots can be handed to parallel readers.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyClassError,
    InsufficientSamplesError,
    NotInUnlabeledError,
)


@dataclass(frozen=True)
class Sample:
    """One image flowing between pools.

    ``true_label`` is always known to the simulator; ``revealed`` records
    whether the oracle has been queried for it (labeled-pool members are
    revealed by construction).
    """

    id: str
    image_ref: str | int
    true_label: int
    revealed: bool = False


@dataclass(frozen=True)
class ImbalanceSpec:
    """Per-class sample counts for the artificially imbalanced pools."""

    labeled_minority_count: int
    labeled_majority_count_per_class: int
    unlabeled_minority_count: int
    unlabeled_majority_count_per_class: int

    def __post_init__(self):
        for name in (
            "labeled_minority_count",
            "labeled_majority_count_per_class",
            "unlabeled_minority_count",
            "unlabeled_majority_count_per_class",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class PoolState:
    """Labeled / unlabeled / unused id sets plus the sample registry."""

    samples: Mapping[str, Sample]
    labeled: frozenset[str]
    unlabeled: frozenset[str]
    unused: frozenset[str]
    minority_class: int
    class_list: tuple[str, ...] = field(default=())

    def validate(self) -> None:
        """Check pairwise disjointness, id resolution, and minority index."""
        if self.labeled & self.unlabeled or self.labeled & self.unused or self.unlabeled & self.unused:
            raise ValueError("pools are not pairwise disjoint")
        for sid in self.labeled | self.unlabeled | self.unused:
            if sid not in self.samples:
                raise ValueError(f"pool id {sid!r} does not resolve to a sample")
        if not 0 <= self.minority_class < len(self.class_list):
            raise ValueError(f"minority_class {self.minority_class} not in class list")

    @property
    def total(self) -> int:
        return len(self.labeled) + len(self.unlabeled) + len(self.unused)

    def class_counts(self, pool: Iterable[str]) -> Counter:
        return Counter(self.samples[sid].true_label for sid in pool)

    def labeled_items(self) -> list[Sample]:
        return [self.samples[sid] for sid in sorted(self.labeled)]

    def unlabeled_items(self) -> list[Sample]:
        return [self.samples[sid] for sid in sorted(self.unlabeled)]

    def to_snapshot(self) -> dict:
        """JSON-friendly snapshot: ids and class counts only."""
        return {
            "labeled": sorted(self.labeled),
            "unlabeled": sorted(self.unlabeled),
            "unused": sorted(self.unused),
            "minority_class": self.minority_class,
            "class_list": list(self.class_list),
            "class_counts": {
                pool: {str(k): v for k, v in sorted(self.class_counts(ids).items())}
                for pool, ids in (
                    ("labeled", self.labeled),
                    ("unlabeled", self.unlabeled),
                    ("unused", self.unused),
                )
            },
        }

    @classmethod
    def from_snapshot(cls, snapshot: dict, samples: Mapping[str, Sample]) -> "PoolState":
        labeled = frozenset(snapshot["labeled"])
        registry = {
            sid: replace(s, revealed=True) if sid in labeled else s
            for sid, s in samples.items()
        }
        state = cls(
            samples=registry,
            labeled=labeled,
            unlabeled=frozenset(snapshot["unlabeled"]),
            unused=frozenset(snapshot["unused"]),
            minority_class=snapshot["minority_class"],
            class_list=tuple(snapshot["class_list"]),
        )
        state.validate()
        return state

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_snapshot(), indent=2, sort_keys=True))


def _group_by_class(samples: Sequence[Sample]) -> dict[int, list[Sample]]:
    groups: dict[int, list[Sample]] = {}
    for s in samples:
        groups.setdefault(s.true_label, []).append(s)
    return groups


def stratified_split(
    dataset: Sequence[Sample], train_fraction: float, seed: int
) -> tuple[list[Sample], list[Sample]]:
    """Split per class: floor(n * fraction) samples to train, remainder to test.

    Raises EmptyClassError if any class has fewer than 2 samples (it could
    not contribute to both sides).
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    groups = _group_by_class(dataset)
    train: list[Sample] = []
    test: list[Sample] = []
    for label in sorted(groups):
        members = sorted(groups[label], key=lambda s: s.id)
        if len(members) < 2:
            raise EmptyClassError(f"class {label} has {len(members)} sample(s), need >= 2")
        order = rng.permutation(len(members))
        n_train = int(np.floor(len(members) * train_fraction))
        train.extend(members[i] for i in order[:n_train])
        test.extend(members[i] for i in order[n_train:])
    return train, test


def build_al_pools(
    train: Sequence[Sample],
    minority_class: int,
    spec: ImbalanceSpec,
    seed: int,
    class_list: Sequence[str] | None = None,
) -> PoolState:
    """Draw the labeled and unlabeled pools uniformly at random under ``seed``;
    everything left over goes to the unused pool. Labeled samples are revealed.
    """
    groups = _group_by_class(train)
    if class_list is None:
        max_label = max(groups) if groups else 0
        class_list = tuple(f"class_{i}" for i in range(max_label + 1))
    else:
        class_list = tuple(class_list)
    if not 0 <= minority_class < len(class_list):
        raise ValueError(f"minority_class {minority_class} not in class list")

    rng = np.random.default_rng(seed)
    registry: dict[str, Sample] = {}
    labeled: set[str] = set()
    unlabeled: set[str] = set()
    unused: set[str] = set()

    for label in sorted(groups):
        members = sorted(groups[label], key=lambda s: s.id)
        if label == minority_class:
            want_labeled = spec.labeled_minority_count
            want_unlabeled = spec.unlabeled_minority_count
        else:
            want_labeled = spec.labeled_majority_count_per_class
            want_unlabeled = spec.unlabeled_majority_count_per_class
        if len(members) < want_labeled + want_unlabeled:
            name = class_list[label] if label < len(class_list) else str(label)
            raise InsufficientSamplesError(name, want_labeled + want_unlabeled, len(members))
        order = rng.permutation(len(members))
        for rank, idx in enumerate(order):
            s = members[idx]
            if rank < want_labeled:
                registry[s.id] = replace(s, revealed=True)
                labeled.add(s.id)
            elif rank < want_labeled + want_unlabeled:
                registry[s.id] = s
                unlabeled.add(s.id)
            else:
                registry[s.id] = s
                unused.add(s.id)

    state = PoolState(
        samples=registry,
        labeled=frozenset(labeled),
        unlabeled=frozenset(unlabeled),
        unused=frozenset(unused),
        minority_class=minority_class,
        class_list=class_list,
    )
    state.validate()
    return state


def oracle_label(state: PoolState, ids: Sequence[str]) -> tuple[PoolState, list[int]]:
    """Simulated annotation: move queried ids unlabeled -> labeled, reveal them,
    and return their true labels in query order.
    """
    unique = set(ids)
    if len(unique) != len(ids):
        dup = next(i for i in ids if list(ids).count(i) > 1)
        raise NotInUnlabeledError(dup)
    for sid in ids:
        if sid not in state.unlabeled:
            raise NotInUnlabeledError(sid)
    labels = [state.samples[sid].true_label for sid in ids]
    registry = dict(state.samples)
    for sid in ids:
        registry[sid] = replace(registry[sid], revealed=True)
    new_state = replace(
        state,
        samples=registry,
        labeled=state.labeled | unique,
        unlabeled=state.unlabeled - unique,
    )
    new_state.validate()
    return new_state, labels


def replenish(
    state: PoolState, moved_class_counts: Mapping[int, int], seed: int
) -> tuple[PoolState, dict[int, int]]:
    """Move up to ``moved_class_counts[c]`` samples of each class c from the
    unused pool back into the unlabeled pool, chosen uniformly under ``seed``.

    Deficits are reported in the returned shortfall map, never raised, so
    long experiments keep running when the reserve dries up.
    """
    rng = np.random.default_rng(seed)
    unused_by_class: dict[int, list[str]] = {}
    for sid in sorted(state.unused):
        unused_by_class.setdefault(state.samples[sid].true_label, []).append(sid)

    moving: set[str] = set()
    shortfall: dict[int, int] = {}
    for label in sorted(moved_class_counts):
        want = moved_class_counts[label]
        if want < 0:
            raise ValueError("moved counts must be non-negative")
        pool = unused_by_class.get(label, [])
        take = min(want, len(pool))
        if take:
            chosen = rng.choice(len(pool), size=take, replace=False)
            moving.update(pool[i] for i in chosen)
        shortfall[label] = want - take

    new_state = replace(
        state,
        unlabeled=state.unlabeled | moving,
        unused=state.unused - moving,
    )
    new_state.validate()
    return new_state, shortfall
