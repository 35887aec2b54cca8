"""Stateless prototype math: means, logits, softmax, prediction, NLL.

Logits are oriented so that higher always means "more likely": the euclidean
score is the negated squared distance and the cosine score is the raw cosine
similarity. Probability vectors are plain float64 arrays that sum to 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateVectorError, EmptySetError

METRIC_EUCLIDEAN = "euclidean"
METRIC_COSINE = "cosine"
METRICS = (METRIC_EUCLIDEAN, METRIC_COSINE)


@dataclass(frozen=True)
class Prototype:
    """Per-class mean vector with the set sizes it was built from."""

    class_local: int
    vector: np.ndarray
    support_count: int
    aux_count: int


def _rows(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        return vectors.reshape(-1, vectors.shape[-1]) if vectors.ndim > 1 else vectors.reshape(1, -1)
    return np.asarray([np.asarray(v, dtype=np.float64) for v in vectors])


def mean_vector(vectors) -> np.ndarray:
    """Coordinate-wise mean; numpy's pairwise-summation reduction keeps the
    result within 1e-12 of an arbitrary-precision mean at realistic sizes."""
    rows = _rows(vectors)
    if rows.size == 0:
        raise EmptySetError("cannot take the mean of an empty set")
    return rows.mean(axis=0)


def prototype_from_support(class_local: int, support) -> Prototype:
    """Mean of the support vectors alone (the prior-only prototype)."""
    rows = _rows(support)
    if rows.size == 0:
        raise EmptySetError(f"class {class_local}: empty support set")
    return Prototype(class_local, rows.mean(axis=0), len(rows), 0)


def prototype_augmented(class_local: int, support, aux) -> Prototype:
    """Mean over the concatenation of support and auxiliary vectors.

    Reduces to prototype_from_support when the auxiliary part is empty; the
    support part may itself be empty under shot removal.
    """
    sup = _rows(support) if len(support) else np.empty((0, 0))
    axr = _rows(aux) if len(aux) else np.empty((0, 0))
    n_sup, n_aux = len(sup), len(axr)
    if n_sup + n_aux == 0:
        raise EmptySetError(f"class {class_local}: both support and auxiliary sets empty")
    if n_sup == 0:
        stacked = axr
    elif n_aux == 0:
        stacked = sup
    else:
        stacked = np.vstack([sup, axr])
    return Prototype(class_local, stacked.mean(axis=0), n_sup, n_aux)


def logits(query: np.ndarray, prototypes: np.ndarray | Sequence, metric: str) -> np.ndarray:
    """Score the query against each prototype row; higher is closer."""
    protos = _rows(prototypes)
    q = np.asarray(query, dtype=np.float64)
    if protos.shape[1] != q.shape[0]:
        raise ValueError(
            f"dimension mismatch: query has {q.shape[0]}, prototypes have {protos.shape[1]}"
        )
    if metric == METRIC_EUCLIDEAN:
        diff = protos - q
        return -np.einsum("ij,ij->i", diff, diff)
    if metric == METRIC_COSINE:
        q_norm = float(np.linalg.norm(q))
        p_norms = np.linalg.norm(protos, axis=1)
        if q_norm == 0.0 or np.any(p_norms == 0.0):
            raise DegenerateVectorError("cosine similarity undefined for zero-norm vectors")
        return (protos @ q) / (p_norms * q_norm)
    raise ValueError(f"unknown metric {metric!r}")


def softmax(values: np.ndarray | Sequence[float]) -> np.ndarray:
    """Overflow-safe softmax (max subtraction); output sums to 1."""
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("softmax requires finite logits")
    shifted = v - v.max()
    e = np.exp(shifted)
    return e / e.sum()


def predict(probs: np.ndarray) -> int:
    """Index of the largest probability; ties break to the lowest index."""
    return int(np.argmax(probs))


def nll(probs_per_query: Sequence[np.ndarray], true_local: Sequence[int]) -> float:
    """Sum of negative log-probabilities of the true classes.

    Returns +inf when any true-class probability is exactly zero.
    """
    if len(probs_per_query) != len(true_local):
        raise ValueError("probs_per_query and true_local must have equal length")
    total = 0.0
    for probs, label in zip(probs_per_query, true_local):
        p = float(probs[label])
        if p <= 0.0:
            return math.inf
        total -= math.log(p)
    return total
