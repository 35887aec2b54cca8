"""Aggregation of prediction logs into metrics, curves, diagnostics and files.

``emit`` writes four artifacts per run, all byte-deterministic for a given
report: report.json (sorted keys, 17-digit floats), predictions.csv (one row
per query), curves.csv (per scored batch) and aux_dump.csv (the auxiliary
memory audit dump). Files are written to a temp name and renamed, so readers
never observe partial output.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .classifier import mean_vector
from .confidence import CorrelationTable, correlation_table
from .engine import PredictionRecord, RunResult
from .errors import DegenerateStatError, EmptySetError, UnsupportedDiagnosticError
from .memory import AuxiliaryMemory
from .serialize import format_float, json_dumps
from .store import SOURCE_SYNTHETIC, EmbeddingStore


def accuracy(records: Iterable[PredictionRecord]) -> float:
    """Fraction of records whose predicted class matches the true class."""
    records = list(records)
    if not records:
        raise EmptySetError("accuracy of an empty record set is undefined")
    return sum(r.predicted_global == r.true_global for r in records) / len(records)


@dataclass(frozen=True)
class ClassConvergence:
    support_error: float    # ||mean(support snapshot) - true mean||
    aux_error: float        # ||mean(aux set) - true mean||
    augmented_error: float  # ||mean(support + aux) - true mean||
    aux_count: int
    warmup_sufficient: bool


def convergence_report(
    memory: AuxiliaryMemory,
    store: EmbeddingStore,
    support_snapshot: dict[int, list[np.ndarray]],
    strictness: float = 1.0,
) -> dict[int, ClassConvergence]:
    """Per-class deviations from the ground-truth mean.

    ``warmup_sufficient`` marks classes whose auxiliary mean is already a
    strictly better estimate of the true mean than the support prototype
    (scaled by ``strictness``). Classes without memory entries are omitted.
    """
    if store.source != SOURCE_SYNTHETIC or not store.has_true_means:
        raise UnsupportedDiagnosticError(
            "convergence diagnostics need a synthetic store with known means"
        )
    out: dict[int, ClassConvergence] = {}
    for class_id in memory.classes():
        aux_vectors = memory.retrieve(class_id)
        if not aux_vectors or class_id not in support_snapshot:
            continue
        mu = store.true_mean(class_id)
        support = support_snapshot[class_id]
        support_error = float(np.linalg.norm(mean_vector(support) - mu))
        aux_error = float(np.linalg.norm(mean_vector(aux_vectors) - mu))
        augmented = mean_vector(list(support) + list(aux_vectors))
        out[class_id] = ClassConvergence(
            support_error=support_error,
            aux_error=aux_error,
            augmented_error=float(np.linalg.norm(augmented - mu)),
            aux_count=len(aux_vectors),
            warmup_sufficient=aux_error < strictness * support_error,
        )
    return out


@dataclass
class RunReport:
    config: dict
    mean_accuracy: float
    ci95: float
    per_batch_accuracy: list[float]
    cumulative_accuracy: list[float]
    memory_curve: list[tuple[int, int]]
    records: list[PredictionRecord]
    aux_entries: list
    correlation: CorrelationTable | None
    convergence: dict[int, ClassConvergence] | None
    warmup_per_batch_accuracy: list[float]
    warmup_cumulative_accuracy: list[float]
    warmup_memory_curve: list[tuple[int, int]]
    shots_remaining: list[int] | None
    dimension: int


def _cumulative(values: Sequence[float]) -> list[float]:
    if not values:
        return []
    return list(np.cumsum(values) / np.arange(1, len(values) + 1))


def ci95_half_width(per_batch: Sequence[float]) -> float:
    """1.96 * sample std / sqrt(T); 0 when fewer than two batches."""
    if len(per_batch) < 2:
        return 0.0
    return 1.96 * float(np.std(per_batch, ddof=1)) / math.sqrt(len(per_batch))


def build_report(result: RunResult, store: EmbeddingStore) -> RunReport:
    """Aggregate a finished run into a serializable report."""
    per_batch = list(result.per_batch_accuracy)
    scored = [r for r in result.records if r.scored]
    try:
        corr = correlation_table(r.scores for r in scored)
    except DegenerateStatError:
        corr = None
    convergence = None
    if (
        result.final_memory is not None
        and store.source == SOURCE_SYNTHETIC
        and store.has_true_means
        and result.final_memory.classes()
    ):
        convergence = convergence_report(result.final_memory, store, result.support_snapshot)
    manifest = store.manifest
    config = dict(result.config.echo())
    config["dataset"] = {
        "source": manifest.source,
        "dimension": manifest.dimension,
        "n_classes": len(manifest.classes),
        "n_samples": sum(n for _, n in manifest.classes),
    }
    return RunReport(
        config=config,
        mean_accuracy=float(np.mean(per_batch)) if per_batch else 0.0,
        ci95=ci95_half_width(per_batch),
        per_batch_accuracy=per_batch,
        cumulative_accuracy=_cumulative(per_batch),
        memory_curve=list(result.memory_curve),
        records=list(result.records),
        aux_entries=(
            result.final_memory.all_entries() if result.final_memory is not None else []
        ),
        correlation=corr,
        convergence=convergence,
        warmup_per_batch_accuracy=list(result.warmup_per_batch_accuracy),
        warmup_cumulative_accuracy=_cumulative(result.warmup_per_batch_accuracy),
        warmup_memory_curve=list(result.warmup_memory_curve),
        shots_remaining=list(result.shots_remaining) if result.shots_remaining is not None else None,
        dimension=result.dimension,
    )


def report_json_dict(report: RunReport) -> dict:
    """The report.json payload (everything except the big CSV bodies)."""
    payload: dict = {
        "config": report.config,
        "mean_accuracy": float(report.mean_accuracy),
        "ci95": float(report.ci95),
        "n_scored_batches": len(report.per_batch_accuracy),
        "per_batch_accuracy": [float(x) for x in report.per_batch_accuracy],
        "cumulative_accuracy": [float(x) for x in report.cumulative_accuracy],
        "memory_entries": [int(e) for e, _ in report.memory_curve],
        "memory_bytes": [int(b) for _, b in report.memory_curve],
        "accepted_total": sum(1 for r in report.records if r.accepted),
        "n_records": len(report.records),
    }
    if report.correlation is not None:
        payload["correlation"] = {
            "delta_vs_conf_max": float(report.correlation.delta_vs_conf_max),
            "delta_prime_vs_conf_max": float(report.correlation.delta_prime_vs_conf_max),
            "delta_prime_vs_delta": float(report.correlation.delta_prime_vs_delta),
        }
    else:
        payload["correlation"] = None
    if report.convergence is not None:
        payload["convergence"] = {
            str(class_id): {
                "support_error": c.support_error,
                "aux_error": c.aux_error,
                "augmented_error": c.augmented_error,
                "aux_count": c.aux_count,
                "warmup_sufficient": c.warmup_sufficient,
            }
            for class_id, c in report.convergence.items()
        }
    else:
        payload["convergence"] = None
    if report.warmup_per_batch_accuracy:
        payload["warmup"] = {
            "per_batch_accuracy": [float(x) for x in report.warmup_per_batch_accuracy],
            "cumulative_accuracy": [float(x) for x in report.warmup_cumulative_accuracy],
            "memory_entries": [int(e) for e, _ in report.warmup_memory_curve],
            "memory_bytes": [int(b) for _, b in report.warmup_memory_curve],
        }
    else:
        payload["warmup"] = None
    payload["shots_remaining"] = report.shots_remaining
    return payload


_PREDICTION_COLUMNS = (
    "batch_index,scored,sample_id,true_global,predicted_global,predicted_local,"
    "accepted,update_outcome,delta,delta_prime,conf_max,logits,probs"
)


def predictions_csv_text(records: Sequence[PredictionRecord]) -> str:
    rows = [_PREDICTION_COLUMNS]
    for r in records:
        logits_text = ";".join(format_float(x) for x in r.logit_values)
        probs_text = ";".join(format_float(x) for x in r.probabilities)
        outcome = r.update_outcome.value if r.update_outcome is not None else ""
        rows.append(
            f"{r.batch_index},{str(r.scored).lower()},{r.sample_id},{r.true_global},"
            f"{r.predicted_global},{r.predicted_local},{str(r.accepted).lower()},{outcome},"
            f"{format_float(r.scores.delta)},{format_float(r.scores.delta_prime)},"
            f"{format_float(r.scores.conf_max)},{logits_text},{probs_text}"
        )
    return "\n".join(rows) + "\n"


def curves_csv_text(report: RunReport) -> str:
    rows = ["batch_index,per_batch_accuracy,cumulative_accuracy,mem_entries,mem_bytes"]
    first_scored = len(report.warmup_per_batch_accuracy)
    for i, (acc, cum) in enumerate(zip(report.per_batch_accuracy, report.cumulative_accuracy)):
        entries, nbytes = report.memory_curve[i]
        rows.append(
            f"{first_scored + i},{format_float(acc)},{format_float(cum)},{entries},{nbytes}"
        )
    return "\n".join(rows) + "\n"


def aux_dump_csv_text(report: RunReport) -> str:
    header = "stored_class,sample_id,accepted_at_batch,delta,delta_prime,conf_max," + ",".join(
        f"f{i}" for i in range(report.dimension)
    )
    rows = [header]
    for entry in report.aux_entries:
        coords = ",".join(format_float(x) for x in entry.vector)
        rows.append(
            f"{entry.stored_class},{entry.sample_id},{entry.accepted_at_batch},"
            f"{format_float(entry.scores.delta)},{format_float(entry.scores.delta_prime)},"
            f"{format_float(entry.scores.conf_max)},{coords}"
        )
    return "\n".join(rows) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc


def emit(report: RunReport, out_dir: str | Path) -> dict[str, Path]:
    """Write report.json, predictions.csv, curves.csv and aux_dump.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "report.json": json_dumps(report_json_dict(report)) + "\n",
        "predictions.csv": predictions_csv_text(report.records),
        "curves.csv": curves_csv_text(report),
        "aux_dump.csv": aux_dump_csv_text(report),
    }
    written: dict[str, Path] = {}
    for name, text in files.items():
        path = out / name
        _atomic_write(path, text)
        written[name] = path
    return written
