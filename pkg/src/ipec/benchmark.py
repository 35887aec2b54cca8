"""The fixed reference synthetic benchmark used by the verification suite.

A 64-dimensional, 20-class isotropic-Gaussian dataset with 500 samples per
class, unit within-class spread, and class means drawn once from a seeded
zero-mean Gaussian. The mean spread is calibrated so that a 5-way 1-shot
baseline lands around 60% accuracy: hard enough that memory accumulation,
shot count and warm-up length all visibly move the numbers, easy enough
that confidently-accepted samples are usually correct.
"""
from __future__ import annotations

import numpy as np

from .store import ClassSpec, EmbeddingStore, generate_synthetic

DIMENSION = 64
N_CLASSES = 20
SAMPLES_PER_CLASS = 500
CLASS_STDDEV = 1.0
MEAN_STDDEV = 0.5
DEFAULT_SEED = 42

N_WAY = 5
M_QUERY = 15

_CACHE: dict[int, EmbeddingStore] = {}


def reference_class_specs(seed: int = DEFAULT_SEED) -> list[ClassSpec]:
    """Class means drawn once from N(0, MEAN_STDDEV^2 I), one spec per class."""
    mean_ss, _ = np.random.SeedSequence(seed).spawn(2)
    means = np.random.default_rng(mean_ss).normal(0.0, MEAN_STDDEV, (N_CLASSES, DIMENSION))
    return [ClassSpec(class_id, means[class_id], CLASS_STDDEV) for class_id in range(N_CLASSES)]


def reference_store(seed: int = DEFAULT_SEED) -> EmbeddingStore:
    """Build (and cache) the benchmark store for a given master seed."""
    if seed not in _CACHE:
        _, data_ss = np.random.SeedSequence(seed).spawn(2)
        data_seed = int(np.random.default_rng(data_ss).integers(0, 2**63))
        _CACHE[seed] = generate_synthetic(
            reference_class_specs(seed), SAMPLES_PER_CLASS, data_seed
        )
    return _CACHE[seed]
