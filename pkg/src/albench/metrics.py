"""Per-cycle evaluation metrics and repeat aggregation.

The reported quantities per cycle are minority recall/precision, the
unweighted macro mean of recall/precision over the non-minority classes,
and overall accuracy. Zero-denominator rates are defined as 0 so NaNs never
propagate into aggregation.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInputError, LengthMismatchError, ShapeMismatchError

RATE_FIELDS = (
    "minority_recall",
    "minority_precision",
    "majority_macro_recall",
    "majority_macro_precision",
    "overall_accuracy",
)


@dataclass(frozen=True)
class CycleMetrics:
    minority_recall: float
    minority_precision: float
    majority_macro_recall: float
    majority_macro_precision: float
    overall_accuracy: float
    cycle_index: int = 0
    labeled_pool_size: int = 0

    def __post_init__(self):
        for name in RATE_FIELDS:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.cycle_index < 0:
            raise ValueError("cycle_index must be >= 0")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "CycleMetrics":
        return cls(**{f.name: data[f.name] for f in dataclasses.fields(cls)})


@dataclass(frozen=True)
class PerformanceDelta:
    """Fieldwise change between two cycles' metrics (last minus first)."""

    minority_recall: float
    minority_precision: float
    majority_macro_recall: float
    majority_macro_precision: float
    overall_accuracy: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def confusion_matrix(
    predictions: Sequence[int], labels: Sequence[int], n_classes: int
) -> np.ndarray:
    """Counts indexed [true, predicted]."""
    mat = np.zeros((n_classes, n_classes), dtype=np.int64)
    for pred, true in zip(predictions, labels):
        mat[true, pred] += 1
    return mat


def _safe_div(num: float, den: float) -> float:
    return float(num / den) if den > 0 else 0.0


def compute_metrics(
    predictions: Sequence[int],
    labels: Sequence[int],
    minority_class: int,
    class_list: Sequence[str],
    cycle_index: int = 0,
    labeled_pool_size: int = 0,
) -> CycleMetrics:
    """Confusion-matrix metrics for one evaluation pass.

    Majority macro rates average over non-minority classes that appear in
    the labels; a class never predicted gets precision 0 by convention.
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if len(predictions) != len(labels):
        raise LengthMismatchError(
            f"{len(predictions)} predictions vs {len(labels)} labels"
        )
    if len(predictions) == 0:
        raise EmptyInputError("no predictions to score")

    n = len(class_list)
    mat = confusion_matrix(predictions, labels, n)
    support = mat.sum(axis=1)
    predicted = mat.sum(axis=0)
    diag = np.diag(mat)

    recalls = [_safe_div(diag[c], support[c]) for c in range(n)]
    precisions = [_safe_div(diag[c], predicted[c]) for c in range(n)]

    majority_present = [c for c in range(n) if c != minority_class and support[c] > 0]
    macro_recall = float(np.mean([recalls[c] for c in majority_present])) if majority_present else 0.0
    macro_precision = (
        float(np.mean([precisions[c] for c in majority_present])) if majority_present else 0.0
    )

    return CycleMetrics(
        minority_recall=recalls[minority_class],
        minority_precision=precisions[minority_class],
        majority_macro_recall=macro_recall,
        majority_macro_precision=macro_precision,
        overall_accuracy=float(diag.sum() / mat.sum()),
        cycle_index=cycle_index,
        labeled_pool_size=labeled_pool_size,
    )


def performance_delta(first: CycleMetrics, last: CycleMetrics) -> PerformanceDelta:
    """Change from the pre-AL model to a later cycle's model."""
    if first.cycle_index != 0:
        raise ValueError("delta baseline must be the cycle-0 metrics")
    return PerformanceDelta(
        **{name: getattr(last, name) - getattr(first, name) for name in RATE_FIELDS}
    )


@dataclass
class CurveAggregate:
    """Per-cycle mean and SEM of each metric over repeated runs."""

    cycles: list[int]
    labeled_pool_sizes: list[int]
    mean: dict[str, list[float]]
    sem: dict[str, list[float]]
    n_runs: int
    single_run_warning: bool = False


def aggregate_sem(runs: Sequence[Sequence[CycleMetrics]]) -> CurveAggregate:
    """Aggregate repeats: mean and standard error of the mean per cycle.

    SEM uses the sample standard deviation (n-1 denominator). A single run
    yields SEM 0 with a warning flag.
    """
    if not runs:
        raise EmptyInputError("no runs to aggregate")
    lengths = {len(r) for r in runs}
    if len(lengths) != 1:
        raise ShapeMismatchError(f"runs have differing cycle counts: {sorted(lengths)}")
    cycles = [m.cycle_index for m in runs[0]]
    for run in runs[1:]:
        if [m.cycle_index for m in run] != cycles:
            raise ShapeMismatchError("runs disagree on cycle indices")

    n = len(runs)
    mean: dict[str, list[float]] = {}
    sem: dict[str, list[float]] = {}
    for name in RATE_FIELDS:
        table = np.array([[getattr(m, name) for m in run] for run in runs])
        mean[name] = table.mean(axis=0).tolist()
        if n >= 2:
            # shift by the first run so identical runs give exactly 0
            sem[name] = ((table - table[0:1]).std(axis=0, ddof=1) / np.sqrt(n)).tolist()
        else:
            sem[name] = [0.0] * table.shape[1]
    return CurveAggregate(
        cycles=cycles,
        labeled_pool_sizes=[m.labeled_pool_size for m in runs[0]],
        mean=mean,
        sem=sem,
        n_runs=n,
        single_run_warning=(n == 1),
    )
