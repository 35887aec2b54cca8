"""Prototype classification with test-time memory accumulation.

The library classifies queries against per-class prototype means, gates
confidently-predicted queries through a dual confidence filter into a
per-class auxiliary memory, and folds that memory back into the prototypes
of later batches. A deterministic episodic harness verifies the behaviour
against synthetic ground truth.
"""

from .classifier import (
    METRIC_COSINE,
    METRIC_EUCLIDEAN,
    Prototype,
    logits,
    mean_vector,
    nll,
    predict,
    prototype_augmented,
    prototype_from_support,
    softmax,
)
from .confidence import (
    ConfidenceScores,
    CorrelationTable,
    Thresholds,
    accept,
    correlation_table,
    entropy,
    global_confidence,
    local_confidence,
    scores_from_probs,
)
from .engine import (
    MODE_IPEC,
    MODE_PN,
    MODE_TWO_STAGE,
    PredictionRecord,
    RunConfig,
    run,
    run_batch,
    run_shot_removal,
)
from .episodes import Episode, episode_stream, sample_episode
from .errors import (
    CapacityError,
    DegenerateStatError,
    DegenerateVectorError,
    DuplicateIdError,
    EmptySetError,
    FormatError,
    UnsupportedDiagnosticError,
)
from .memory import (
    STRATEGY_ADD,
    STRATEGY_REMOVE,
    STRATEGY_REPLACE,
    AuxEntry,
    AuxiliaryMemory,
    UpdateOutcome,
)
from .reporting import RunReport, accuracy, build_report, convergence_report, emit
from .store import (
    ClassSpec,
    DatasetManifest,
    Embedding,
    EmbeddingStore,
    generate_synthetic,
    load_csv,
    write_csv,
)

__version__ = "0.1.0"
