"""Experiment orchestration: the train / score / select / label / replenish /
evaluate cycle, repeats with a rotating minority class, and the
initial-pool-size sweep.

A run produces cycles + 1 metric entries. The entry for cycle k describes
the model trained on the labeled pool after k query rounds; entry 0 is the
pre-AL model. Each cycle trains from scratch, scores the unlabeled pool
(with a freshly trained discriminator when that method is active), queries
the oracle, and replenishes the unlabeled pool from the unused reserve. A
final training pass evaluates the model that has seen every queried label.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .acquisition import (
    AcquisitionMethod,
    AcquisitionScore,
    attach_ids,
    bald_scores,
    discriminator_scores,
    entropy_scores,
    random_scores,
    select_top_k,
    variation_ratio_scores,
)
from .config import dataclass_to_dict, parse_dataclass, stable_hash
from .datasets import DatasetConfig, LoadedDataset, load_dataset
from .errors import ConfigError, PoolExhaustedError
from .metrics import CycleMetrics, PerformanceDelta, compute_metrics, performance_delta
from .pools import ImbalanceSpec, PoolState, build_al_pools, oracle_label, replenish
from .seeding import derive_seed
from .training import (
    TrainConfig,
    TrainedModel,
    mc_dropout_predict,
    predict_probs,
    save_checkpoint,
    train_classifier,
    train_discriminator,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dataset: DatasetConfig
    imbalance: ImbalanceSpec
    method: AcquisitionMethod = field(default_factory=AcquisitionMethod)
    train: TrainConfig = field(default_factory=TrainConfig)
    cycles: int = 5
    samples_per_cycle: int = 200
    minority_rotation: tuple[int, ...] = (0, 1, 2)
    repeats: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.cycles < 1:
            raise ConfigError("cycles", "must be >= 1")
        if self.samples_per_cycle < 1:
            raise ConfigError("samples_per_cycle", "must be >= 1")
        if not self.minority_rotation:
            raise ConfigError("minority_rotation", "must not be empty")
        if self.repeats != len(self.minority_rotation):
            raise ConfigError(
                "repeats",
                f"repeats={self.repeats} must equal len(minority_rotation)="
                f"{len(self.minority_rotation)}",
            )

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return parse_dataclass(cls, data)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return dataclass_to_dict(self)

    def config_hash(self) -> str:
        return stable_hash(self.to_dict())


@dataclass
class RunRecord:
    method: str
    repeat_index: int
    minority_class: int
    seed: int
    config_hash: str
    metrics: list[CycleMetrics]
    selected: dict[int, list[str]] = field(default_factory=dict)
    selection_class_counts: dict[int, dict[str, int]] = field(default_factory=dict)
    shortfalls: dict[int, dict[str, int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "repeat_index": self.repeat_index,
            "minority_class": self.minority_class,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "metrics": [m.to_dict() for m in self.metrics],
            "selected": {str(k): v for k, v in self.selected.items()},
            "selection_class_counts": {
                str(k): v for k, v in self.selection_class_counts.items()
            },
            "shortfalls": {str(k): v for k, v in self.shortfalls.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        return cls(
            method=data["method"],
            repeat_index=data["repeat_index"],
            minority_class=data["minority_class"],
            seed=data["seed"],
            config_hash=data["config_hash"],
            metrics=[CycleMetrics.from_dict(m) for m in data["metrics"]],
            selected={int(k): v for k, v in data["selected"].items()},
            selection_class_counts={
                int(k): v for k, v in data["selection_class_counts"].items()
            },
            shortfalls={int(k): v for k, v in data["shortfalls"].items()},
        )

    def delta(self) -> PerformanceDelta:
        return performance_delta(self.metrics[0], self.metrics[-1])


# ---------------------------------------------------------------------------
# Cycle internals
# ---------------------------------------------------------------------------


def _train_on_pool(
    state: PoolState, data: LoadedDataset, config: ExperimentConfig, train_seed: int
) -> TrainedModel:
    ids = sorted(state.labeled)
    images = data.bank.get_many(ids)
    labels = [state.samples[sid].true_label for sid in ids]
    train_config = dataclasses.replace(config.train, seed=train_seed)
    return train_classifier(images, labels, data.class_list, train_config)


def _evaluate(
    model: TrainedModel,
    data: LoadedDataset,
    minority_class: int,
    cycle_index: int,
    labeled_pool_size: int,
) -> CycleMetrics:
    images = data.bank.get_many([s.id for s in data.test])
    labels = [s.true_label for s in data.test]
    preds = predict_probs(model, images).argmax(axis=1)
    return compute_metrics(
        preds, labels, minority_class, data.class_list,
        cycle_index=cycle_index, labeled_pool_size=labeled_pool_size,
    )


def _score_unlabeled(
    state: PoolState,
    data: LoadedDataset,
    model: TrainedModel,
    config: ExperimentConfig,
    repeat_index: int,
    cycle_index: int,
) -> list[AcquisitionScore]:
    ids = sorted(state.unlabeled)
    method = config.method
    if method.tag == "random":
        rng = np.random.default_rng(
            derive_seed(config.seed, repeat_index, cycle_index, "acquisition")
        )
        return attach_ids(ids, random_scores(len(ids), rng))

    images = data.bank.get_many(ids)
    if method.tag == "discriminator":
        labeled_ids = sorted(state.labeled)
        labeled_images = data.bank.get_many(labeled_ids)
        labeled_labels = [state.samples[sid].true_label for sid in labeled_ids]
        disc_config = dataclasses.replace(
            config.train,
            seed=derive_seed(config.seed, repeat_index, cycle_index, "discriminator"),
        )
        disc = train_discriminator(
            labeled_images, labeled_labels, state.minority_class, disc_config
        )
        if method.discriminator_mc_dropout:
            mc = mc_dropout_predict(
                disc, images, method.mc_passes,
                seed=derive_seed(config.seed, repeat_index, cycle_index, "disc-mc"),
            )
            probs = mc.mean(axis=0)
        else:
            probs = predict_probs(disc, images)
        return attach_ids(ids, discriminator_scores(probs))

    mc = mc_dropout_predict(
        model, images, method.mc_passes,
        seed=derive_seed(config.seed, repeat_index, cycle_index, "mc"),
    )
    if method.tag == "entropy":
        values = entropy_scores(mc)
    elif method.tag == "bald":
        values = bald_scores(mc)
    elif method.tag == "variation-ratio":
        values = variation_ratio_scores(mc)
    else:
        raise ConfigError("method.tag", f"unknown acquisition method {method.tag!r}")
    return attach_ids(ids, values)


def run_cycle(
    state: PoolState,
    data: LoadedDataset,
    config: ExperimentConfig,
    repeat_index: int = 0,
    cycle_index: int = 0,
    out_dir: Path | None = None,
) -> tuple[PoolState, CycleMetrics, list[str], dict[int, int], dict[int, int]]:
    """One AL round: train on the current labeled pool, score the unlabeled
    pool, query the top-K, replenish, and evaluate the trained model on the
    untouched test set.

    Returns (new state, metrics of the trained model, selected ids,
    per-class moved counts, replenish shortfall).
    """
    k = config.samples_per_cycle
    if len(state.unlabeled) < k:
        raise PoolExhaustedError(
            f"unlabeled pool has {len(state.unlabeled)} < {k} samples"
        )

    pool_size = len(state.labeled)
    model = _train_on_pool(
        state, data, config, derive_seed(config.seed, repeat_index, cycle_index, "train")
    )
    metrics = _evaluate(model, data, state.minority_class, cycle_index, pool_size)

    scores = _score_unlabeled(state, data, model, config, repeat_index, cycle_index)
    selected = select_top_k(scores, k)

    state, labels = oracle_label(state, selected)
    moved = Counter(labels)
    state, shortfall = replenish(
        state, moved, derive_seed(config.seed, repeat_index, cycle_index, "replenish")
    )
    if any(shortfall.values()):
        logger.warning(
            "cycle %d replenish shortfall: %s", cycle_index,
            {data.class_list[c]: v for c, v in shortfall.items() if v},
        )

    if out_dir is not None:
        _dump_scores(out_dir, scores, config.method.tag, cycle_index)
        save_checkpoint(
            model,
            out_dir / f"cycle{cycle_index}" / "model.pt",
            config_hash=config.config_hash(),
        )

    return state, metrics, selected, dict(moved), dict(shortfall)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _dump_scores(out_dir: Path, scores, method_tag: str, cycle_index: int) -> None:
    path = out_dir / f"scores_cycle{cycle_index}.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "score", "method", "cycle"])
        for s in scores:
            writer.writerow([s.sample_id, f"{s.score:.10g}", method_tag, cycle_index])


def _append_metrics(out_dir: Path, metrics: CycleMetrics) -> None:
    with open(out_dir / "metrics.jsonl", "a") as fh:
        fh.write(json.dumps(metrics.to_dict(), sort_keys=True) + "\n")


def _append_selected(out_dir: Path, cycle_index: int, ids: Sequence[str], state: PoolState) -> None:
    path = out_dir / "selected.csv"
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(["cycle", "sample_id", "true_label"])
        for sid in ids:
            writer.writerow([cycle_index, sid, state.samples[sid].true_label])


def _append_shortfall(out_dir: Path, cycle_no: int, shortfall: dict) -> None:
    with open(out_dir / "shortfalls.jsonl", "a") as fh:
        fh.write(json.dumps({"cycle": cycle_no, "shortfall": shortfall}, sort_keys=True) + "\n")


def _load_progress(
    out_dir: Path,
) -> tuple[list[CycleMetrics], dict[int, list[str]], dict[int, dict[str, int]]]:
    metrics: list[CycleMetrics] = []
    path = out_dir / "metrics.jsonl"
    if path.exists():
        for line in path.read_text().splitlines():
            if line.strip():
                metrics.append(CycleMetrics.from_dict(json.loads(line)))
    selected: dict[int, list[str]] = {}
    sel_path = out_dir / "selected.csv"
    if sel_path.exists():
        with open(sel_path, newline="") as fh:
            for row in csv.DictReader(fh):
                selected.setdefault(int(row["cycle"]), []).append(row["sample_id"])
    shortfalls: dict[int, dict[str, int]] = {}
    sf_path = out_dir / "shortfalls.jsonl"
    if sf_path.exists():
        for line in sf_path.read_text().splitlines():
            if line.strip():
                rec = json.loads(line)
                shortfalls[int(rec["cycle"])] = rec["shortfall"]
    return metrics, selected, shortfalls


# ---------------------------------------------------------------------------
# Full runs
# ---------------------------------------------------------------------------


def run_experiment(
    config: ExperimentConfig,
    repeat_index: int = 0,
    out_dir: str | Path | None = None,
    resume: bool = False,
    data: LoadedDataset | None = None,
) -> RunRecord:
    """Run one repeat: cycle-0 evaluation through the final retrained model.

    With ``out_dir`` set, progress (metrics.jsonl, selected.csv, score dumps,
    pool snapshots, checkpoints) is persisted after every cycle, and
    ``resume=True`` continues from the last completed cycle.
    """
    minority = config.minority_rotation[repeat_index]
    config_hash = config.config_hash()
    if data is None:
        data = load_dataset(
            config.dataset, derive_seed(config.seed, repeat_index, "split")
        )

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if not resume and (out_dir / "metrics.jsonl").exists():
            raise ConfigError(
                "out_dir",
                f"{out_dir} already holds run output; pass resume=True or use a fresh directory",
            )
        config_path = out_dir / "config.json"
        if config_path.exists():
            existing = json.loads(config_path.read_text())
            if existing.get("config_hash") != config_hash:
                raise ConfigError(
                    "config", f"out_dir {out_dir} holds a different experiment "
                    f"({existing.get('config_hash')} != {config_hash})"
                )
        else:
            config_path.write_text(
                json.dumps(
                    {"config_hash": config_hash, "repeat_index": repeat_index,
                     "minority_class": minority, **config.to_dict()},
                    indent=2, sort_keys=True,
                )
            )

    record = RunRecord(
        method=config.method.tag,
        repeat_index=repeat_index,
        minority_class=minority,
        seed=config.seed,
        config_hash=config_hash,
        metrics=[],
    )

    state = build_al_pools(
        data.train, minority, config.imbalance,
        derive_seed(config.seed, repeat_index, "pools"),
        class_list=data.class_list,
    )

    start_cycle = 0
    if resume and out_dir is not None:
        done_metrics, done_selected, done_shortfalls = _load_progress(out_dir)
        if done_metrics:
            start_cycle = len(done_metrics)
            record.metrics = done_metrics
            record.selected = done_selected
            record.shortfalls = done_shortfalls
            for cyc, ids in done_selected.items():
                counts = Counter(state.samples[sid].true_label for sid in ids)
                record.selection_class_counts[cyc] = {
                    data.class_list[c]: n for c, n in sorted(counts.items())
                }
            if start_cycle > config.cycles:
                logger.info("run already complete at %s", out_dir)
                return record
            state = PoolState.from_snapshot(
                json.loads((out_dir / f"state_cycle{start_cycle - 1}.json").read_text()),
                {s.id: s for s in data.train},
            )
            logger.info("resuming %s at cycle %d", out_dir, start_cycle)

    for cycle_index in range(start_cycle, config.cycles):
        state, metrics, selected, moved, shortfall = run_cycle(
            state, data, config, repeat_index, cycle_index, out_dir=out_dir
        )
        cycle_no = cycle_index + 1  # selections belong to the query they trigger
        record.metrics.append(metrics)
        record.selected[cycle_no] = selected
        record.selection_class_counts[cycle_no] = {
            data.class_list[c]: n for c, n in sorted(moved.items())
        }
        record.shortfalls[cycle_no] = {
            data.class_list[c]: n for c, n in sorted(shortfall.items()) if n
        }
        if out_dir is not None:
            _append_metrics(out_dir, metrics)
            _append_selected(out_dir, cycle_no, selected, state)
            _append_shortfall(out_dir, cycle_no, record.shortfalls[cycle_no])
            state.save(out_dir / f"state_cycle{cycle_index}.json")
        logger.info(
            "[%s repeat %d] cycle %d: minority recall %.3f, accuracy %.3f",
            config.name, repeat_index, cycle_index,
            metrics.minority_recall, metrics.overall_accuracy,
        )

    if start_cycle <= config.cycles:
        final_model = _train_on_pool(
            state, data, config,
            derive_seed(config.seed, repeat_index, config.cycles, "train"),
        )
        final_metrics = _evaluate(
            final_model, data, minority, config.cycles, len(state.labeled)
        )
        record.metrics.append(final_metrics)
        if out_dir is not None:
            _append_metrics(out_dir, final_metrics)
            save_checkpoint(
                final_model,
                out_dir / f"cycle{config.cycles}" / "model.pt",
                config_hash=config_hash,
            )

    if out_dir is not None:
        (out_dir / "record.json").write_text(
            json.dumps(record.to_dict(), indent=2, sort_keys=True)
        )
    return record


def run_repeats(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    resume: bool = False,
    data: LoadedDataset | None = None,
) -> list[RunRecord]:
    """One run per minority_rotation entry, each with its own seed streams."""
    records = []
    for repeat_index in range(config.repeats):
        repeat_dir = Path(out_dir) / f"repeat{repeat_index}" if out_dir else None
        records.append(
            run_experiment(
                config, repeat_index=repeat_index, out_dir=repeat_dir,
                resume=resume, data=data,
            )
        )
    return records


def run_sweep(
    config: ExperimentConfig,
    majority_counts: Sequence[int],
    methods: Sequence[str] | None = None,
    out_dir: str | Path | None = None,
    resume: bool = False,
    data: LoadedDataset | None = None,
) -> list[dict]:
    """Initial-pool-size sweep: per (majority count, method), the mean
    before/after delta across repeats. The unlabeled pool spec stays fixed.
    """
    if methods is None:
        methods = [config.method.tag]
    rows: list[dict] = []
    for count in majority_counts:
        imbalance = dataclasses.replace(
            config.imbalance, labeled_majority_count_per_class=count
        )
        for tag in methods:
            varied = dataclasses.replace(
                config,
                imbalance=imbalance,
                method=dataclasses.replace(config.method, tag=tag),
                name=f"{config.name}-maj{count}-{tag}",
            )
            sub_dir = Path(out_dir) / f"maj{count}" / tag if out_dir else None
            records = run_repeats(varied, out_dir=sub_dir, resume=resume, data=data)
            deltas = [r.delta() for r in records]
            row = {"majority_count": count, "method": tag, "n_repeats": len(records)}
            for name in dataclasses.asdict(deltas[0]):
                row[f"delta_{name}"] = float(
                    np.mean([getattr(d, name) for d in deltas])
                )
            rows.append(row)
    if out_dir is not None:
        _write_sweep_table(rows, Path(out_dir) / "sweep_table.csv")
    return rows


def _write_sweep_table(rows: Sequence[dict], path: Path) -> None:
    if not rows:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("")
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    k: (f"{v:.10g}" if isinstance(v, float) else v)
                    for k, v in row.items()
                }
            )
