"""Per-class auxiliary memory with ADD/REPLACE/REMOVE update strategies.

"Duplicate" always means the same sample_id, never vector equality. Under
REPLACE and REMOVE each sample_id lives in at most one class set; under ADD
duplicates accumulate freely and the id index only remembers the first
insertion. Once frozen, a memory rejects every update and is observationally
immutable.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .confidence import ConfidenceScores
from .serialize import format_float
from .store import Embedding

STRATEGY_ADD = "ADD"
STRATEGY_REPLACE = "REPLACE"
STRATEGY_REMOVE = "REMOVE"
STRATEGIES = (STRATEGY_ADD, STRATEGY_REPLACE, STRATEGY_REMOVE)


class UpdateOutcome(str, Enum):
    INSERTED = "inserted"
    MOVED = "moved"
    PURGED = "purged"
    SKIPPED_DUPLICATE = "skipped_duplicate"
    REJECTED_FROZEN = "rejected_frozen"


@dataclass(frozen=True)
class AuxEntry:
    sample_id: int
    vector: np.ndarray
    stored_class: int
    accepted_at_batch: int
    scores: ConfidenceScores


class AuxiliaryMemory:
    """Single-writer memory of accepted query embeddings, grouped by the
    class they were predicted as."""

    def __init__(self, dimension: int, strategy: str, known_classes=None):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
        self._dimension = dimension
        self._strategy = strategy
        self._known = frozenset(known_classes) if known_classes is not None else None
        self._sets: dict[int, list[AuxEntry]] = {}
        self._index: dict[int, int] = {}  # sample_id -> stored class (first class under ADD)
        self._frozen = False

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def strategy(self) -> str:
        return self._strategy

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> None:
        self._frozen = True

    def update(
        self,
        sample: Embedding,
        predicted_global: int,
        scores: ConfidenceScores,
        batch_index: int,
    ) -> UpdateOutcome:
        """Apply one accepted sample under the configured strategy.

        The caller is responsible for gating with the acceptance rule; this
        method only implements duplicate handling.
        """
        if self._frozen:
            return UpdateOutcome.REJECTED_FROZEN
        if self._known is not None and predicted_global not in self._known:
            raise KeyError(f"unknown class_id {predicted_global}")
        entry = AuxEntry(sample.sample_id, sample.vector, predicted_global, batch_index, scores)

        if self._strategy == STRATEGY_ADD:
            self._sets.setdefault(predicted_global, []).append(entry)
            self._index.setdefault(sample.sample_id, predicted_global)
            return UpdateOutcome.INSERTED

        previous = self._index.get(sample.sample_id)
        if previous is None:
            self._sets.setdefault(predicted_global, []).append(entry)
            self._index[sample.sample_id] = predicted_global
            return UpdateOutcome.INSERTED
        if previous == predicted_global:
            return UpdateOutcome.SKIPPED_DUPLICATE
        self._delete(previous, sample.sample_id)
        if self._strategy == STRATEGY_REPLACE:
            self._sets.setdefault(predicted_global, []).append(entry)
            self._index[sample.sample_id] = predicted_global
            return UpdateOutcome.MOVED
        del self._index[sample.sample_id]
        return UpdateOutcome.PURGED

    def _delete(self, class_id: int, sample_id: int) -> None:
        entries = self._sets[class_id]
        for i, entry in enumerate(entries):
            if entry.sample_id == sample_id:
                del entries[i]
                return
        raise AssertionError(f"index out of sync for sample {sample_id}")

    def retrieve(self, global_class: int) -> list[np.ndarray]:
        """Stored vectors for the class in insertion order; [] if unseen."""
        return [entry.vector for entry in self._sets.get(global_class, ())]

    def entries(self, global_class: int) -> tuple[AuxEntry, ...]:
        return tuple(self._sets.get(global_class, ()))

    def classes(self) -> list[int]:
        return sorted(cid for cid, entries in self._sets.items() if entries)

    def memory_usage(self) -> tuple[int, int]:
        """(entry count, bytes) using the 4-bytes-per-coordinate convention."""
        count = sum(len(entries) for entries in self._sets.values())
        return count, count * self._dimension * 4

    def all_entries(self) -> list[AuxEntry]:
        """All entries, sorted by stored class then insertion order."""
        out: list[AuxEntry] = []
        for class_id in self.classes():
            out.extend(self._sets[class_id])
        return out

    def dump_csv(self, path: str | Path) -> None:
        """Audit dump; also the export format for external visualization."""
        header = "stored_class,sample_id,accepted_at_batch,delta,delta_prime,conf_max," + ",".join(
            f"f{i}" for i in range(self._dimension)
        )
        rows = [header]
        for entry in self.all_entries():
            scores = entry.scores
            coords = ",".join(format_float(x) for x in entry.vector)
            rows.append(
                f"{entry.stored_class},{entry.sample_id},{entry.accepted_at_batch},"
                f"{format_float(scores.delta)},{format_float(scores.delta_prime)},"
                f"{format_float(scores.conf_max)},{coords}"
            )
        Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")

    @classmethod
    def restore_csv(cls, path: str | Path, strategy: str) -> "AuxiliaryMemory":
        """Rebuild a memory from a dump (audit round-trips; insertion order
        within each class is preserved, cross-class interleaving is not)."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        header = lines[0].split(",")
        dimension = len(header) - 6
        memory = cls(dimension, strategy)
        for line in lines[1:]:
            if not line:
                continue
            cols = line.split(",")
            vec = np.asarray([float(x) for x in cols[6:]], dtype=np.float64)
            vec.setflags(write=False)
            entry = AuxEntry(
                sample_id=int(cols[1]),
                vector=vec,
                stored_class=int(cols[0]),
                accepted_at_batch=int(cols[2]),
                scores=ConfidenceScores(float(cols[3]), float(cols[4]), float(cols[5])),
            )
            memory._sets.setdefault(entry.stored_class, []).append(entry)
            memory._index.setdefault(entry.sample_id, entry.stored_class)
        return memory
