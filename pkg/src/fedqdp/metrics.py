"""Metrics export, run manifests, and run comparison.

Both export formats carry the same columns in the same order:
t, downlink_bits, uplink_bits, mean_bits, test_acc, train_acc. Accuracies
are blank (csv) or null (jsonl) on rounds without evaluation, otherwise
fixed to six decimals.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from fedqdp.federation import RoundRecord

COLUMNS = ("t", "downlink_bits", "uplink_bits", "mean_bits", "test_acc", "train_acc")
_INT_COLUMNS = {"t", "downlink_bits", "uplink_bits"}


def record_to_row(record: RoundRecord) -> dict:
    """Exported view of one record, column order fixed."""
    return {
        "t": record.t,
        "downlink_bits": record.downlink_bits,
        "uplink_bits": record.uplink_bits,
        "mean_bits": record.mean_bits,
        "test_acc": record.test_acc,
        "train_acc": record.train_acc,
    }


def _format_cell(key: str, value) -> str:
    if value is None:
        return ""
    if key in _INT_COLUMNS:
        return str(int(value))
    return f"{value:.6f}"


def write_records(records: list[RoundRecord], path: str | Path) -> None:
    """Write csv or jsonl depending on the file suffix."""
    path = Path(path)
    rows = [record_to_row(r) for r in records]
    if path.suffix == ".csv":
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(COLUMNS)
            for row in rows:
                writer.writerow([_format_cell(k, row[k]) for k in COLUMNS])
    elif path.suffix == ".jsonl":
        with open(path, "w") as f:
            for row in rows:
                f.write(json.dumps(row) + "\n")
    else:
        raise ValueError(f"unsupported metrics format {path.suffix!r}, use .csv or .jsonl")


def read_records(path: str | Path) -> list[dict]:
    """Parse an exported metrics file back into row dicts.

    Numbers come back as int/float and missing accuracies as None, so a
    write/read/write cycle is byte-identical.
    """
    path = Path(path)
    rows = []
    if path.suffix == ".csv":
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != COLUMNS:
                raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
            for raw in reader:
                row = {}
                for key in COLUMNS:
                    cell = raw[key]
                    if cell == "":
                        row[key] = None
                    elif key in _INT_COLUMNS:
                        row[key] = int(cell)
                    else:
                        row[key] = float(cell)
                rows.append(row)
    elif path.suffix == ".jsonl":
        with open(path) as f:
            for line in f:
                if line.strip():
                    rows.append(json.loads(line))
    else:
        raise ValueError(f"unsupported metrics format {path.suffix!r}, use .csv or .jsonl")
    return rows


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run and find its outputs."""

    config: dict
    seed: int
    backend: str
    package_version: str
    started: str
    finished: str
    outputs: tuple[str, ...]


def write_manifest(manifest: RunManifest, path: str | Path) -> None:
    with open(path, "w") as f:
        json.dump(asdict(manifest), f, indent=2, sort_keys=True)
        f.write("\n")


def read_manifest(path: str | Path) -> RunManifest:
    with open(path) as f:
        raw = json.load(f)
    raw["outputs"] = tuple(raw["outputs"])
    return RunManifest(**raw)


@dataclass(frozen=True)
class ComparisonSummary:
    """Totals and headline accuracy for a baseline/variant pair."""

    total_bits_baseline: int
    total_bits_variant: int
    ratio: float
    reduction_percent: float
    best_test_acc_baseline: float | None
    best_round_baseline: int | None
    best_test_acc_variant: float | None
    best_round_variant: int | None


def total_bits(rows: list[dict]) -> int:
    return sum(int(r["downlink_bits"]) + int(r["uplink_bits"]) for r in rows)


def best_accuracy(rows: list[dict]) -> tuple[float | None, int | None]:
    """Highest test accuracy and the earliest round reaching it."""
    best_acc, best_round = None, None
    for row in rows:
        acc = row["test_acc"]
        if acc is not None and (best_acc is None or acc > best_acc):
            best_acc, best_round = acc, int(row["t"])
    return best_acc, best_round


def compare_runs(baseline_path: str | Path, variant_path: str | Path) -> ComparisonSummary:
    """Compare total traffic and best accuracy of two exported runs.

    reduction_percent is how much smaller the variant's total is; identical
    runs give exactly 0.0.
    """
    base_rows = read_records(baseline_path)
    var_rows = read_records(variant_path)
    base_total = total_bits(base_rows)
    var_total = total_bits(var_rows)
    if base_total <= 0:
        raise ValueError(f"{baseline_path}: baseline reports no traffic")
    ratio = var_total / base_total
    base_best, base_round = best_accuracy(base_rows)
    var_best, var_round = best_accuracy(var_rows)
    return ComparisonSummary(
        total_bits_baseline=base_total,
        total_bits_variant=var_total,
        ratio=ratio,
        reduction_percent=(1.0 - ratio) * 100.0,
        best_test_acc_baseline=base_best,
        best_round_baseline=base_round,
        best_test_acc_variant=var_best,
        best_round_variant=var_round,
    )
