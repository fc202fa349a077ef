"""labelloop: stream filtering, crowd-labelled active learning, trend indices.

The pieces compose left to right: ingest replays document streams,
filterlang matches boolean keyword queries, pipeline persists and enqueues
matches, labelqueue serves annotators by uncertainty and recency,
annotations walks question sequences to consensus, classifier retrains on
fresh labels, trends folds predictions into moving averages and a
standardized sentiment index.  engine.Platform wires them together over an
append-only event store; service exposes HTTP; cli drives it all.
"""

from .annotations import (
    AnnotationRow,
    ConsensusLabel,
    Project,
    QuestionSequence,
    load_project,
    majority_vote,
    resolve_consensus,
    validate_sequence,
)
from .classifier import (
    Model,
    featurize,
    load_model,
    predict,
    save_model,
    train,
    uncertainty,
)
from .clock import SimulatedClock, SystemClock
from .engine import Platform, replay_check
from .filterlang import (
    FilterQuery,
    ParseError,
    matches,
    parse_query,
    print_query,
    tokenize,
)
from .ingest import (
    Document,
    IngestStats,
    Rejection,
    StreamSourceConfig,
    ingest_batch,
    open_stream,
    parse_document,
)
from .labelqueue import LabelQueue, QueueConfig, priority_score
from .pipeline import JobQueue, ProcessedDocument, process_document, run_workers
from .service import Service
from .store import EventLog
from .trends import (
    IndexParams,
    TrendPoint,
    TrendStore,
    moving_average,
    sentiment_index,
    sentiment_ratio,
    trend_query,
)

__version__ = "0.1.0"
