"""Auxiliary memory: strategy semantics, freeze contract, dumps."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipec import (
    AuxiliaryMemory,
    ConfidenceScores,
    Embedding,
    UpdateOutcome,
)

SCORES = ConfidenceScores(0.9, 0.8, 0.95)


def emb(sample_id, *coords):
    vec = np.asarray(coords if coords else (0.0, 0.0), dtype=np.float64)
    vec.setflags(write=False)
    return Embedding(sample_id, vec, true_class=0)


def update(memory, sample_id, predicted, batch=0):
    return memory.update(emb(sample_id), predicted, SCORES, batch)


class TestStrategySemantics:
    @pytest.mark.parametrize("strategy", ["ADD", "REPLACE", "REMOVE"])
    def test_fresh_sample_inserts(self, strategy):
        memory = AuxiliaryMemory(2, strategy)
        assert update(memory, 1, 0) is UpdateOutcome.INSERTED
        assert memory.memory_usage()[0] == 1

    def test_replace_moves_to_new_class(self):
        memory = AuxiliaryMemory(2, "REPLACE")
        update(memory, 1, 0)
        assert update(memory, 1, 1) is UpdateOutcome.MOVED
        assert memory.retrieve(0) == []
        assert len(memory.retrieve(1)) == 1

    def test_remove_purges_both(self):
        memory = AuxiliaryMemory(2, "REMOVE")
        update(memory, 1, 0)
        assert update(memory, 1, 1) is UpdateOutcome.PURGED
        assert memory.retrieve(0) == [] and memory.retrieve(1) == []
        assert memory.memory_usage() == (0, 0)

    @pytest.mark.parametrize("strategy", ["REPLACE", "REMOVE"])
    def test_same_class_duplicate_skipped(self, strategy):
        memory = AuxiliaryMemory(2, strategy)
        update(memory, 1, 0)
        assert update(memory, 1, 0) is UpdateOutcome.SKIPPED_DUPLICATE
        assert memory.memory_usage()[0] == 1

    def test_add_always_appends(self):
        memory = AuxiliaryMemory(2, "ADD")
        for _ in range(3):
            assert update(memory, 1, 0) is UpdateOutcome.INSERTED
        assert update(memory, 1, 1) is UpdateOutcome.INSERTED
        assert memory.memory_usage()[0] == 4

    def test_purged_sample_may_return(self):
        memory = AuxiliaryMemory(2, "REMOVE")
        update(memory, 1, 0)
        update(memory, 1, 1)  # purged
        assert update(memory, 1, 1) is UpdateOutcome.INSERTED
        assert len(memory.retrieve(1)) == 1

    def test_unknown_class_raises_when_universe_known(self):
        memory = AuxiliaryMemory(2, "ADD", known_classes=[0, 1])
        with pytest.raises(KeyError):
            update(memory, 1, 7)

    def test_unknown_strategy_rejected(self):
        with pytest.raises(ValueError):
            AuxiliaryMemory(2, "EVICT")


class TestRetrieve:
    def test_unseen_class_is_empty(self):
        assert AuxiliaryMemory(2, "ADD").retrieve(5) == []

    def test_insertion_order_preserved(self):
        memory = AuxiliaryMemory(2, "ADD")
        for i, x in enumerate([1.0, 2.0, 3.0]):
            memory.update(emb(i, x, 0.0), 0, SCORES, batch_index=i)
        vectors = memory.retrieve(0)
        assert [v[0] for v in vectors] == [1.0, 2.0, 3.0]

    def test_entry_metadata(self):
        memory = AuxiliaryMemory(2, "REMOVE")
        memory.update(emb(9, 1.5, 2.5), 3, SCORES, batch_index=7)
        (entry,) = memory.entries(3)
        assert entry.sample_id == 9
        assert entry.stored_class == 3
        assert entry.accepted_at_batch == 7
        assert entry.scores == SCORES


class TestFreeze:
    def test_updates_rejected_after_freeze(self):
        memory = AuxiliaryMemory(2, "ADD")
        update(memory, 1, 0)
        memory.freeze()
        assert update(memory, 2, 0) is UpdateOutcome.REJECTED_FROZEN
        assert memory.memory_usage()[0] == 1

    def test_freeze_is_idempotent(self):
        memory = AuxiliaryMemory(2, "ADD")
        memory.freeze()
        memory.freeze()
        assert memory.frozen

    def test_retrieve_unchanged_by_freeze(self):
        memory = AuxiliaryMemory(2, "REPLACE")
        update(memory, 1, 0)
        before = [v.tolist() for v in memory.retrieve(0)]
        memory.freeze()
        update(memory, 1, 1)
        assert [v.tolist() for v in memory.retrieve(0)] == before


class TestMemoryUsage:
    def test_empty(self):
        assert AuxiliaryMemory(64, "ADD").memory_usage() == (0, 0)

    def test_byte_accounting(self):
        memory = AuxiliaryMemory(64, "ADD")
        vec = np.zeros(64)
        for i in range(10):
            memory.update(Embedding(i, vec, 0), 0, SCORES, 0)
        assert memory.memory_usage() == (10, 2560)

    def test_purge_reduces_count(self):
        memory = AuxiliaryMemory(64, "REMOVE")
        vec = np.zeros(64)
        for i in range(10):
            memory.update(Embedding(i, vec, 0), i % 2, SCORES, 0)
        memory.update(Embedding(0, vec, 0), 1, SCORES, 1)  # conflict: purged
        assert memory.memory_usage() == (9, 2304)


class TestDump:
    def test_round_trip(self, tmp_path):
        memory = AuxiliaryMemory(2, "REMOVE")
        rng = np.random.default_rng(0)
        for i in range(20):
            memory.update(emb(i, *rng.standard_normal(2)), int(rng.integers(0, 3)), SCORES, i)
        path = tmp_path / "dump.csv"
        memory.dump_csv(path)
        restored = AuxiliaryMemory.restore_csv(path, "REMOVE")
        assert restored.memory_usage() == memory.memory_usage()
        for class_id in memory.classes():
            got = [e.sample_id for e in restored.entries(class_id)]
            want = [e.sample_id for e in memory.entries(class_id)]
            assert got == want
        second = tmp_path / "dump2.csv"
        restored.dump_csv(second)
        assert path.read_bytes() == second.read_bytes()

    def test_dump_sorted_by_class(self, tmp_path):
        memory = AuxiliaryMemory(2, "ADD")
        update(memory, 1, 5)
        update(memory, 2, 0)
        path = tmp_path / "dump.csv"
        memory.dump_csv(path)
        lines = path.read_text().splitlines()
        classes = [int(line.split(",")[0]) for line in lines[1:]]
        assert classes == sorted(classes)


@given(
    st.lists(
        st.tuples(st.integers(0, 5), st.integers(0, 2)),
        min_size=0,
        max_size=40,
    )
)
@settings(max_examples=200, deadline=None)
def test_remove_count_matches_replayed_log(events):
    """Under REMOVE: entry count == insertions minus purges, and each held
    sample_id appears exactly once across all class sets."""
    memory = AuxiliaryMemory(2, "REMOVE")
    insertions, purges = 0, 0
    for sample_id, predicted in events:
        outcome = update(memory, sample_id, predicted)
        if outcome is UpdateOutcome.INSERTED:
            insertions += 1
        elif outcome is UpdateOutcome.PURGED:
            purges += 1
    count = memory.memory_usage()[0]
    assert count == insertions - purges
    held = [e.sample_id for c in memory.classes() for e in memory.entries(c)]
    assert len(held) == len(set(held)) == count


@given(
    st.lists(st.tuples(st.integers(0, 5), st.integers(0, 2)), min_size=0, max_size=30)
)
@settings(max_examples=200, deadline=None)
def test_add_count_monotone(events):
    memory = AuxiliaryMemory(2, "ADD")
    last = 0
    for sample_id, predicted in events:
        update(memory, sample_id, predicted)
        count = memory.memory_usage()[0]
        assert count >= last
        last = count
