"""Reporting: accuracy, convergence diagnostics, file emission."""
import json

import numpy as np
import pytest

from ipec import (
    ClassSpec,
    ConfidenceScores,
    EmptySetError,
    RunConfig,
    UnsupportedDiagnosticError,
    accuracy,
    build_report,
    convergence_report,
    emit,
    generate_synthetic,
    run,
)
from ipec.engine import MODE_IPEC, PredictionRecord
from ipec.memory import AuxiliaryMemory
from ipec.store import Embedding, load_csv, write_csv


def record(true_global, predicted_global, batch=0, sample_id=0):
    probs = np.array([0.7, 0.3])
    return PredictionRecord(
        batch_index=batch,
        scored=True,
        sample_id=sample_id,
        true_global=true_global,
        predicted_global=predicted_global,
        predicted_local=0,
        logit_values=np.array([-1.0, -2.0]),
        probabilities=probs,
        scores=ConfidenceScores(0.5, 0.5, 0.7),
        accepted=False,
    )


def toy_store(mean_scale=2.0, seed=0, dim=6):
    rng = np.random.default_rng(seed)
    specs = [ClassSpec(c, mean_scale * rng.standard_normal(dim), 1.0) for c in range(5)]
    return generate_synthetic(specs, samples_per_class=30, seed=seed)


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy([record(1, 1), record(2, 2)]) == 1.0

    def test_three_of_four(self):
        records = [record(0, 0), record(1, 1), record(2, 2), record(3, 0)]
        assert accuracy(records) == 0.75

    def test_empty_rejected(self):
        with pytest.raises(EmptySetError):
            accuracy([])

    def test_matches_recount_from_emitted_csv(self, tmp_path):
        store = toy_store()
        config = RunConfig(mode=MODE_IPEC, n_way=3, k_shot=1, m_query=4, test_batches=10, seed=0)
        report = build_report(run(store, config), store)
        emit(report, tmp_path)
        lines = (tmp_path / "predictions.csv").read_text().splitlines()[1:]
        hits, total = 0, 0
        for line in lines:
            cols = line.split(",")
            total += 1
            hits += cols[3] == cols[4]  # true_global vs predicted_global
        assert hits / total == pytest.approx(
            np.mean([r.predicted_global == r.true_global for r in report.records])
        )


class TestConvergenceReport:
    def test_memory_equal_to_support_gives_equal_errors(self):
        store = toy_store()
        memory = AuxiliaryMemory(store.dimension, "ADD", known_classes=store.class_ids)
        support = [e.vector for e in store.samples_of(0)[:3]]
        for i, vec in enumerate(support):
            memory.update(Embedding(1000 + i, vec, 0), 0, ConfidenceScores(1, 1, 1), 0)
        diag = convergence_report(memory, store, {0: support})
        entry = diag[0]
        assert entry.aux_error == pytest.approx(entry.support_error, rel=1e-12)
        assert not entry.warmup_sufficient  # strict inequality at factor 1.0

    def test_large_aux_beats_one_shot_support(self):
        wins = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            mu = np.zeros(64)
            support = [rng.standard_normal(64)]
            aux_mean = rng.standard_normal((500, 64)).mean(axis=0)
            wins += np.linalg.norm(aux_mean - mu) < np.linalg.norm(support[0] - mu)
        assert wins >= 95

    def test_empty_class_omitted(self):
        store = toy_store()
        memory = AuxiliaryMemory(store.dimension, "ADD", known_classes=store.class_ids)
        vec = store.samples_of(1)[0].vector
        memory.update(Embedding(5000, vec, 1), 1, ConfidenceScores(1, 1, 1), 0)
        diag = convergence_report(memory, store, {1: [vec], 2: [vec]})
        assert set(diag) == {1}

    def test_file_backed_store_rejected(self, tmp_path):
        store = toy_store()
        path = tmp_path / "s.csv"
        write_csv(store, path)
        file_store = load_csv(path)
        memory = AuxiliaryMemory(store.dimension, "ADD")
        with pytest.raises(UnsupportedDiagnosticError):
            convergence_report(memory, file_store, {})


def test_cumulative_accuracy_rises_on_reference_benchmark():
    # learning during inference: the cumulative curve ends above its value
    # at batch 10 for at least 9 of 10 seeds
    from ipec import benchmark

    store = benchmark.reference_store()
    wins = 0
    for seed in range(10):
        config = RunConfig(mode=MODE_IPEC, n_way=5, k_shot=1, m_query=15,
                           test_batches=150, seed=seed)
        report = build_report(run(store, config), store)
        wins += report.cumulative_accuracy[-1] > report.cumulative_accuracy[9]
    assert wins >= 9


class TestEmit:
    @pytest.fixture
    def report(self):
        store = toy_store()
        config = RunConfig(mode=MODE_IPEC, n_way=3, k_shot=1, m_query=4, test_batches=8, seed=1)
        return build_report(run(store, config), store)

    def test_reemit_is_byte_identical(self, report, tmp_path):
        first = emit(report, tmp_path / "a")
        second = emit(report, tmp_path / "b")
        for name in first:
            assert first[name].read_bytes() == second[name].read_bytes()

    def test_curves_row_count_equals_scored_batches(self, report, tmp_path):
        files = emit(report, tmp_path)
        rows = files["curves.csv"].read_text().splitlines()
        assert len(rows) - 1 == len(report.per_batch_accuracy)

    def test_report_json_parses_losslessly(self, report, tmp_path):
        files = emit(report, tmp_path)
        payload = json.loads(files["report.json"].read_text())
        assert payload["mean_accuracy"] == report.mean_accuracy
        assert payload["ci95"] == report.ci95
        assert payload["per_batch_accuracy"] == report.per_batch_accuracy
        assert payload["config"]["seed"] == 1

    def test_aux_dump_matches_memory_dump_format(self, report, tmp_path):
        files = emit(report, tmp_path)
        header = files["aux_dump.csv"].read_text().splitlines()[0]
        assert header.startswith("stored_class,sample_id,accepted_at_batch,delta,delta_prime,conf_max,f0")
