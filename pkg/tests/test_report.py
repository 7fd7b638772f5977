import json

import numpy as np
import pytest

from albench.errors import EmptyInputError
from albench.metrics import CycleMetrics, aggregate_sem
from albench.report import (
    aggregate_runs_tree,
    emit_report,
    load_runs_tree,
    read_metrics_jsonl,
)


def fake_curve(rng, cycles=6, base=0.3, slope=0.05):
    out = []
    for k in range(cycles):
        v = float(np.clip(base + slope * k + rng.normal(0, 0.02), 0, 1))
        out.append(
            CycleMetrics(v, v * 0.9, min(v + 0.3, 1.0), min(v + 0.25, 1.0), v,
                         cycle_index=k, labeled_pool_size=100 + 50 * k)
        )
    return out


@pytest.fixture
def aggregates():
    rng = np.random.default_rng(0)
    return {
        method: aggregate_sem([fake_curve(rng) for _ in range(3)])
        for method in ("random", "entropy", "bald", "discriminator")
    }


class TestEmitReport:
    def test_csv_row_count(self, aggregates, tmp_path):
        written = emit_report(aggregates, tmp_path, formats=("csv",))
        table = (tmp_path / "metrics_table.csv").read_text().splitlines()
        # header + methods x metrics x cycles
        assert len(table) == 1 + 4 * 5 * 6
        per_metric = [line for line in table if ",minority_recall," in line]
        assert len(per_metric) == 24  # 4 methods x 6 cycles
        assert written == [tmp_path / "metrics_table.csv"]

    def test_plots_written(self, aggregates, tmp_path):
        written = emit_report(aggregates, tmp_path, formats=("png", "json"))
        assert (tmp_path / "curves.png").exists()
        assert (tmp_path / "summary.json").exists()
        assert len(written) == 2

    def test_sweep_plot(self, aggregates, tmp_path):
        rows = [
            {"majority_count": c, "method": m,
             "delta_minority_recall": 0.2 - 0.01 * c,
             "delta_minority_precision": 0.1,
             "delta_overall_accuracy": 0.05}
            for c in (100, 300) for m in ("random", "discriminator")
        ]
        emit_report(aggregates, tmp_path, formats=("png",), sweep_rows=rows)
        assert (tmp_path / "sweep.png").exists()

    def test_empty_aggregates_no_partial_files(self, tmp_path):
        out = tmp_path / "report"
        with pytest.raises(EmptyInputError):
            emit_report({}, out)
        assert not out.exists() or not any(out.iterdir())

    def test_regeneration_is_byte_identical(self, aggregates, tmp_path):
        emit_report(aggregates, tmp_path / "a", formats=("csv", "json"))
        emit_report(aggregates, tmp_path / "b", formats=("csv", "json"))
        assert (tmp_path / "a" / "metrics_table.csv").read_bytes() == (
            tmp_path / "b" / "metrics_table.csv"
        ).read_bytes()
        assert (tmp_path / "a" / "summary.json").read_bytes() == (
            tmp_path / "b" / "summary.json"
        ).read_bytes()

    def test_summary_reports_both_delta_windows(self, aggregates, tmp_path):
        emit_report(aggregates, tmp_path, formats=("json",))
        summary = json.loads((tmp_path / "summary.json").read_text())
        entry = summary["discriminator"]
        assert "delta_final_vs_initial" in entry
        assert "delta_mean_over_cycles_vs_initial" in entry
        agg = aggregates["discriminator"]
        series = agg.mean["minority_recall"]
        assert entry["delta_final_vs_initial"]["minority_recall"] == pytest.approx(
            series[-1] - series[0]
        )
        assert entry["delta_mean_over_cycles_vs_initial"]["minority_recall"] == pytest.approx(
            np.mean(series[1:]) - series[0]
        )


class TestLoadRunsTree:
    def test_reads_repeat_layout(self, tmp_path):
        rng = np.random.default_rng(1)
        for method in ("random", "bald"):
            for repeat in range(2):
                d = tmp_path / method / f"repeat{repeat}"
                d.mkdir(parents=True)
                lines = [
                    json.dumps(m.to_dict(), sort_keys=True)
                    for m in fake_curve(rng, cycles=3)
                ]
                (d / "metrics.jsonl").write_text("\n".join(lines) + "\n")
        tree = load_runs_tree(tmp_path)
        assert set(tree) == {"random", "bald"}
        assert len(tree["random"]) == 2
        aggs = aggregate_runs_tree(tree)
        assert aggs["bald"].n_runs == 2
        assert aggs["bald"].cycles == [0, 1, 2]

    def test_reads_flat_layout(self, tmp_path):
        rng = np.random.default_rng(2)
        d = tmp_path / "solo"
        d.mkdir()
        lines = [json.dumps(m.to_dict()) for m in fake_curve(rng, cycles=2)]
        (d / "metrics.jsonl").write_text("\n".join(lines) + "\n")
        tree = load_runs_tree(tmp_path)
        assert len(tree["solo"]) == 1

    def test_roundtrip_metrics_jsonl(self, tmp_path):
        rng = np.random.default_rng(3)
        curve = fake_curve(rng, cycles=4)
        path = tmp_path / "metrics.jsonl"
        path.write_text("\n".join(json.dumps(m.to_dict()) for m in curve) + "\n")
        assert read_metrics_jsonl(path) == curve
