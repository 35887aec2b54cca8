"""Embedding data model, CSV persistence and synthetic dataset generation.

A store is an immutable collection of embeddings with stable 64-bit sample
ids. Stores come from two sources: CSV files (header
``class_id,sample_id,f0,...,f{d-1}``) and synthetic isotropic-Gaussian class
generators that retain their ground-truth means for diagnostics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DuplicateIdError, FormatError
from .serialize import format_float

SOURCE_SYNTHETIC = "synthetic"
SOURCE_FILE = "file"


@dataclass(frozen=True, eq=False)
class Embedding:
    """One sample: a d-dimensional feature vector with a stable identity."""

    sample_id: int
    vector: np.ndarray
    true_class: int


@dataclass(frozen=True)
class ClassSpec:
    """Synthetic class description: isotropic Gaussian around ``mean``."""

    class_id: int
    mean: np.ndarray
    stddev: float

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        object.__setattr__(self, "mean", mean)
        if mean.ndim != 1 or mean.size == 0:
            raise ValueError("class mean must be a non-empty 1-d vector")
        if not np.all(np.isfinite(mean)):
            raise ValueError(f"class {self.class_id}: mean has non-finite entries")
        if not (self.stddev > 0):
            raise ValueError(f"class {self.class_id}: stddev must be > 0, got {self.stddev}")


@dataclass(frozen=True)
class DatasetManifest:
    dimension: int
    classes: tuple[tuple[int, int], ...]  # (class_id, sample_count), sorted by id
    source: str


class EmbeddingStore:
    """Immutable set of embeddings indexed by sample id and by class."""

    def __init__(
        self,
        dimension: int,
        samples: list[Embedding],
        source: str,
        true_means: dict[int, np.ndarray] | None = None,
    ):
        self._dimension = dimension
        self._samples = tuple(samples)
        self._source = source
        self._by_id: dict[int, Embedding] = {}
        self._by_class: dict[int, list[Embedding]] = {}
        for emb in samples:
            if emb.vector.shape != (dimension,):
                raise ValueError(
                    f"sample {emb.sample_id}: vector has shape {emb.vector.shape}, "
                    f"expected ({dimension},)"
                )
            if not np.all(np.isfinite(emb.vector)):
                raise ValueError(f"sample {emb.sample_id}: non-finite coordinate")
            if emb.sample_id in self._by_id:
                raise DuplicateIdError(f"duplicate sample_id {emb.sample_id}")
            self._by_id[emb.sample_id] = emb
            self._by_class.setdefault(emb.true_class, []).append(emb)
        if not self._by_class:
            raise ValueError("store must contain at least one sample")
        self._true_means = dict(true_means) if true_means is not None else None

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def source(self) -> str:
        return self._source

    @property
    def samples(self) -> tuple[Embedding, ...]:
        return self._samples

    @property
    def class_ids(self) -> list[int]:
        return sorted(self._by_class)

    @property
    def manifest(self) -> DatasetManifest:
        classes = tuple((cid, len(self._by_class[cid])) for cid in self.class_ids)
        return DatasetManifest(self._dimension, classes, self._source)

    def samples_of(self, class_id: int) -> list[Embedding]:
        if class_id not in self._by_class:
            raise KeyError(f"unknown class_id {class_id}")
        return list(self._by_class[class_id])

    def by_id(self, sample_id: int) -> Embedding:
        return self._by_id[sample_id]

    def true_mean(self, class_id: int) -> np.ndarray | None:
        """Ground-truth class mean for synthetic stores, None for file-backed."""
        if class_id not in self._by_class:
            raise KeyError(f"unknown class_id {class_id}")
        if self._true_means is None:
            return None
        return self._true_means[class_id].copy()

    @property
    def has_true_means(self) -> bool:
        return self._true_means is not None


def _frozen(vec: np.ndarray) -> np.ndarray:
    v = np.ascontiguousarray(vec, dtype=np.float64)
    v.setflags(write=False)
    return v


def generate_synthetic(
    specs: list[ClassSpec], samples_per_class: int, seed: int
) -> EmbeddingStore:
    """Draw ``samples_per_class`` i.i.d. samples per class from N(mean, stddev^2 I).

    A pure function of its arguments: the same (specs, samples_per_class,
    seed) always produces a bit-identical store. Sample ids are assigned
    sequentially from 0 in spec order.
    """
    if not specs:
        raise ValueError("specs must be non-empty")
    if samples_per_class < 1:
        raise ValueError("samples_per_class must be >= 1")
    dim = specs[0].mean.size
    seen_ids: set[int] = set()
    for spec in specs:
        if spec.mean.size != dim:
            raise ValueError("all class means must have the same dimension")
        if spec.class_id in seen_ids:
            raise ValueError(f"duplicate class_id {spec.class_id} in specs")
        seen_ids.add(spec.class_id)

    rng = np.random.default_rng(seed)
    samples: list[Embedding] = []
    true_means: dict[int, np.ndarray] = {}
    next_id = 0
    for spec in specs:
        draws = spec.mean + spec.stddev * rng.standard_normal((samples_per_class, dim))
        true_means[spec.class_id] = spec.mean.copy()
        for row in draws:
            samples.append(Embedding(next_id, _frozen(row), spec.class_id))
            next_id += 1
    return EmbeddingStore(dim, samples, SOURCE_SYNTHETIC, true_means)


def _parse_header(line: str) -> int:
    cols = line.rstrip("\n").split(",")
    if len(cols) < 3 or cols[0] != "class_id" or cols[1] != "sample_id":
        raise FormatError(
            "header must be 'class_id,sample_id,f0,...'; got " + repr(line.strip())
        )
    for i, name in enumerate(cols[2:]):
        if name != f"f{i}":
            raise FormatError(f"feature column {i} must be named 'f{i}', got {name!r}")
    return len(cols) - 2


def load_csv(path: str | Path) -> EmbeddingStore:
    """Load a store from its canonical CSV form.

    Raises FormatError for schema violations, ValueError (with the row
    number) for non-finite values, DuplicateIdError for repeated ids.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    dim = _parse_header(lines[0])
    samples: list[Embedding] = []
    for row_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cols = line.split(",")
        if len(cols) != dim + 2:
            raise FormatError(
                f"{path}: row {row_no} has {len(cols)} columns, expected {dim + 2}"
            )
        try:
            class_id = int(cols[0])
            sample_id = int(cols[1])
        except ValueError as exc:
            raise FormatError(f"{path}: row {row_no}: bad id field: {exc}") from None
        vec = np.empty(dim, dtype=np.float64)
        for j, text in enumerate(cols[2:]):
            try:
                vec[j] = float(text)
            except ValueError:
                raise ValueError(f"{path}: row {row_no}: f{j} is not a number: {text!r}") from None
            if not math.isfinite(vec[j]):
                raise ValueError(f"{path}: row {row_no}: f{j} is non-finite: {text!r}")
        samples.append(Embedding(sample_id, _frozen(vec), class_id))
    return EmbeddingStore(dim, samples, SOURCE_FILE)


def write_csv(store: EmbeddingStore, path: str | Path) -> None:
    """Write the canonical CSV form; load_csv(write_csv(s)) reproduces s exactly."""
    path = Path(path)
    header = "class_id,sample_id," + ",".join(f"f{i}" for i in range(store.dimension))
    rows = [header]
    for emb in store.samples:
        coords = ",".join(format_float(x) for x in emb.vector)
        rows.append(f"{emb.true_class},{emb.sample_id},{coords}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
