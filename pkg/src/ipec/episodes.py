"""N-way K-shot episode construction with a deterministic seeded stream.

The generator is numpy's PCG64 (``numpy.random.default_rng``); streams are a
pure function of (store, n_way, k_shot, m_query, seed, count). Class choice
and within-class sample choice are both uniform without replacement, and the
support/query split is disjoint by construction. Classes repeat freely
across episodes of a stream.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import CapacityError
from .store import Embedding, EmbeddingStore

RNG_NAME = "numpy-pcg64"


@dataclass(frozen=True)
class Episode:
    """One task: local class c maps to global class ``class_map[c]``."""

    batch_index: int
    class_map: tuple[int, ...]
    support: tuple[tuple[Embedding, ...], ...]
    query: tuple[tuple[Embedding, ...], ...]

    @property
    def n_way(self) -> int:
        return len(self.class_map)


def _check_capacity(store: EmbeddingStore, n_way: int, k_shot: int, m_query: int) -> None:
    if n_way < 1 or k_shot < 1 or m_query < 1:
        raise ValueError("n_way, k_shot and m_query must all be >= 1")
    counts = store.manifest.classes
    if len(counts) < n_way:
        raise CapacityError(f"store has {len(counts)} classes, need {n_way}")
    needed = k_shot + m_query
    for class_id, count in counts:
        if count < needed:
            raise CapacityError(
                f"class {class_id} has {count} samples, need {needed} (K+M)"
            )


def sample_episode(
    store: EmbeddingStore,
    n_way: int,
    k_shot: int,
    m_query: int,
    rng: np.random.Generator,
    batch_index: int = 0,
) -> Episode:
    """Draw one episode, advancing ``rng`` deterministically."""
    _check_capacity(store, n_way, k_shot, m_query)
    class_ids = np.asarray(store.class_ids)
    chosen = rng.choice(class_ids, size=n_way, replace=False)
    support: list[tuple[Embedding, ...]] = []
    query: list[tuple[Embedding, ...]] = []
    for class_id in chosen:
        members = store.samples_of(int(class_id))
        picks = rng.choice(len(members), size=k_shot + m_query, replace=False)
        support.append(tuple(members[i] for i in picks[:k_shot]))
        query.append(tuple(members[i] for i in picks[k_shot:]))
    return Episode(
        batch_index=batch_index,
        class_map=tuple(int(c) for c in chosen),
        support=tuple(support),
        query=tuple(query),
    )


def episode_stream(
    store: EmbeddingStore,
    n_way: int,
    k_shot: int,
    m_query: int,
    seed: int,
    count: int,
) -> Iterator[Episode]:
    """Yield ``count`` episodes with batch_index 0..count-1."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return
    _check_capacity(store, n_way, k_shot, m_query)
    rng = np.random.default_rng(seed)
    for batch_index in range(count):
        yield sample_episode(store, n_way, k_shot, m_query, rng, batch_index)
