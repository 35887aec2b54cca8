"""Run protocols: PN baseline, incremental memory ("ipec"), and the
two-stage warm-up/test variant ("ipec_two_stage").

Prototypes are computed once per batch from the support set plus whatever the
auxiliary memory currently holds; queries inside a batch never see each
other's updates. Accepted queries are folded into the memory after the whole
batch is classified, in query-iteration order (class-major, then query
position), which makes duplicate handling deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .classifier import (
    METRIC_EUCLIDEAN,
    METRICS,
    Prototype,
    logits as compute_logits,
    predict,
    prototype_augmented,
    softmax,
)
from .confidence import ConfidenceScores, Thresholds, accept, scores_from_probs
from .episodes import RNG_NAME, Episode, episode_stream
from .memory import STRATEGIES, STRATEGY_REMOVE, AuxiliaryMemory, UpdateOutcome
from .store import EmbeddingStore

MODE_PN = "pn"
MODE_IPEC = "ipec"
MODE_TWO_STAGE = "ipec_two_stage"
MODES = (MODE_PN, MODE_IPEC, MODE_TWO_STAGE)


@dataclass(frozen=True)
class RunConfig:
    mode: str
    n_way: int
    k_shot: int
    m_query: int
    metric: str = METRIC_EUCLIDEAN
    tau: float = 0.5
    tau_prime: float = 0.5
    strategy: str = STRATEGY_REMOVE
    warmup_batches: int = 0
    test_batches: int = 1
    seed: int = 0
    shot_removal_k: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; expected one of {METRICS}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        for name in ("n_way", "k_shot", "m_query", "test_batches"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not (0.0 <= self.tau <= 1.0 and 0.0 <= self.tau_prime <= 1.0):
            raise ValueError("tau and tau_prime must be in [0, 1]")
        if self.mode == MODE_TWO_STAGE:
            if self.warmup_batches < 1:
                raise ValueError("ipec_two_stage requires warmup_batches >= 1")
        elif self.warmup_batches != 0:
            raise ValueError(f"warmup_batches is only meaningful in {MODE_TWO_STAGE} mode")
        if self.shot_removal_k is not None:
            if self.mode != MODE_IPEC:
                raise ValueError("shot removal requires mode=ipec")
            if self.shot_removal_k < 1:
                raise ValueError("shot_removal_k must be >= 1")

    @property
    def thresholds(self) -> Thresholds:
        return Thresholds(self.tau, self.tau_prime)

    def echo(self) -> dict:
        """Self-describing config dict for reports."""
        return {
            "mode": self.mode,
            "n_way": self.n_way,
            "k_shot": self.k_shot,
            "m_query": self.m_query,
            "metric": self.metric,
            "tau": float(self.tau),
            "tau_prime": float(self.tau_prime),
            "strategy": self.strategy,
            "warmup_batches": self.warmup_batches,
            "test_batches": self.test_batches,
            "seed": self.seed,
            "shot_removal_k": self.shot_removal_k,
            "rng": RNG_NAME,
        }


@dataclass
class PredictionRecord:
    batch_index: int
    scored: bool
    sample_id: int
    true_global: int
    predicted_global: int
    predicted_local: int
    logit_values: np.ndarray
    probabilities: np.ndarray
    scores: ConfidenceScores
    accepted: bool
    update_outcome: UpdateOutcome | None = None


def effective_shots(k_shot: int, batch_index: int, removal_k: int | None) -> int:
    """Shots remaining at a batch under the one-shot-every-k schedule."""
    if removal_k is None:
        return k_shot
    return max(0, k_shot - batch_index // removal_k)


def _batch_prototypes(
    episode: Episode, memory: AuxiliaryMemory | None, config: RunConfig
) -> list[Prototype]:
    prototypes: list[Prototype] = []
    for local, global_id in enumerate(episode.class_map):
        support = [e.vector for e in episode.support[local]]
        if config.mode == MODE_PN:
            prototypes.append(prototype_augmented(local, support, []))
            continue
        aux = memory.retrieve(global_id) if memory is not None else []
        keep = effective_shots(config.k_shot, episode.batch_index, config.shot_removal_k)
        if keep < len(support):
            # floor rule: a class with no auxiliary history keeps one shot
            if keep == 0 and not aux:
                keep = 1
            support = support[:keep]
        prototypes.append(prototype_augmented(local, support, aux))
    return prototypes


def run_batch(
    episode: Episode,
    memory: AuxiliaryMemory | None,
    config: RunConfig,
    scored: bool = True,
) -> list[PredictionRecord]:
    """Classify every query of one episode against batch-start prototypes,
    then apply memory updates for the accepted ones."""
    prototypes = _batch_prototypes(episode, memory, config)
    proto_matrix = np.vstack([p.vector for p in prototypes])
    thresholds = config.thresholds
    records: list[PredictionRecord] = []
    pending: list[tuple[PredictionRecord, object]] = []
    for local, global_id in enumerate(episode.class_map):
        for emb in episode.query[local]:
            logit_values = compute_logits(emb.vector, proto_matrix, config.metric)
            probs = softmax(logit_values)
            predicted_local = predict(probs)
            scores = scores_from_probs(probs)
            is_accepted = config.mode != MODE_PN and accept(scores, thresholds)
            record = PredictionRecord(
                batch_index=episode.batch_index,
                scored=scored,
                sample_id=emb.sample_id,
                true_global=global_id,
                predicted_global=episode.class_map[predicted_local],
                predicted_local=predicted_local,
                logit_values=logit_values,
                probabilities=probs,
                scores=scores,
                accepted=is_accepted,
            )
            records.append(record)
            if is_accepted:
                pending.append((record, emb))
    if memory is not None:
        for record, emb in pending:
            record.update_outcome = memory.update(
                emb, record.predicted_global, record.scores, episode.batch_index
            )
    return records


@dataclass
class RunResult:
    """Raw outcome of a run, consumed by the reporting layer."""

    config: RunConfig
    store_manifest_source: str
    dimension: int
    records: list[PredictionRecord] = field(default_factory=list)
    per_batch_accuracy: list[float] = field(default_factory=list)
    memory_curve: list[tuple[int, int]] = field(default_factory=list)
    shots_remaining: list[int] | None = None
    warmup_per_batch_accuracy: list[float] = field(default_factory=list)
    warmup_memory_curve: list[tuple[int, int]] = field(default_factory=list)
    final_memory: AuxiliaryMemory | None = None
    support_snapshot: dict[int, list[np.ndarray]] = field(default_factory=dict)


def _batch_accuracy(records: Iterable[PredictionRecord]) -> float:
    records = list(records)
    return sum(r.predicted_global == r.true_global for r in records) / len(records)


def run(store: EmbeddingStore, config: RunConfig) -> RunResult:
    """Execute one protocol run over a fresh deterministic episode stream."""
    needs_memory = config.mode != MODE_PN
    memory = (
        AuxiliaryMemory(store.dimension, config.strategy, known_classes=store.class_ids)
        if needs_memory
        else None
    )
    total = config.warmup_batches + config.test_batches
    result = RunResult(config=config, store_manifest_source=store.source, dimension=store.dimension)
    if config.shot_removal_k is not None:
        result.shots_remaining = []
    stream = episode_stream(
        store, config.n_way, config.k_shot, config.m_query, config.seed, total
    )
    for episode in stream:
        in_warmup = episode.batch_index < config.warmup_batches
        if config.mode == MODE_TWO_STAGE and episode.batch_index == config.warmup_batches:
            memory.freeze()
        for local, global_id in enumerate(episode.class_map):
            if global_id not in result.support_snapshot:
                result.support_snapshot[global_id] = [
                    e.vector for e in episode.support[local]
                ]
        records = run_batch(episode, memory, config, scored=not in_warmup)
        acc = _batch_accuracy(records)
        usage = memory.memory_usage() if memory is not None else (0, 0)
        result.records.extend(records)
        if in_warmup:
            result.warmup_per_batch_accuracy.append(acc)
            result.warmup_memory_curve.append(usage)
        else:
            result.per_batch_accuracy.append(acc)
            result.memory_curve.append(usage)
            if result.shots_remaining is not None:
                result.shots_remaining.append(
                    effective_shots(config.k_shot, episode.batch_index, config.shot_removal_k)
                )
    result.final_memory = memory
    return result


def run_shot_removal(store: EmbeddingStore, config: RunConfig) -> RunResult:
    """Run with a support-shot removal schedule (mode must be ipec and
    shot_removal_k set)."""
    if config.mode != MODE_IPEC or config.shot_removal_k is None:
        raise ValueError("run_shot_removal requires mode=ipec with shot_removal_k set")
    return run(store, config)
