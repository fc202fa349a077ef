"""Synthetic streams, scripted annotators, and label-efficiency runs.

Two kinds of simulation live here:

* An active-learning efficiency comparison on a drifting two-class stream:
  selection via the real priority queue (least-confidence uncertainty plus
  recency) against uniform-random selection from the same arrival window,
  measuring labels needed to reach a target accuracy on the post-drift
  distribution.

* A fully deterministic end-to-end scenario: replay an NDJSON fixture into
  a fresh platform, run scripted annotators to consensus through the real
  session machinery, retrain on schedule, recompute predictions, and export
  the trend CSV.  Two runs from the same inputs produce byte-identical
  outputs, which is the platform's reproducibility contract.
"""
from __future__ import annotations

import csv
import io
import random
import statistics
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable

from . import classifier
from .classifier import Hyperparams, LabelledExample, featurize
from .clock import UTC, SimulatedClock, format_timestamp
from .engine import Platform
from .ingest import StreamSourceConfig, open_stream
from .labelqueue import LabelQueue, QueueConfig
from .trends import trends_to_csv

SIM_T0 = datetime(2021, 4, 1, tzinfo=UTC)
SIM_DIM = 2 ** 14  # small hash space keeps the many retrains cheap


# ---------------------------------------------------------------------------
# drifting stream

@dataclass
class DriftConfig:
    vocab_per_class: int = 40
    class_tokens_per_doc: int = 2
    noise_tokens_per_doc: int = 3
    noise_vocab: int = 30
    drift_at_arrival: int = 400  # arrivals before the vocabulary flips
    arrival_gap: float = 15.0  # seconds between documents
    eval_size: int = 200
    eval_class_tokens: int = 3


@dataclass
class SimDoc:
    doc_id: str
    text: str
    label: str
    created_at: datetime
    phase: int


class DriftingStream:
    """Two-class stream whose indicative vocabulary is replaced mid-run."""

    CLASSES = ("negative", "positive")

    def __init__(self, seed: int, config: DriftConfig | None = None):
        self.config = config or DriftConfig()
        self.rng = random.Random(seed)
        self._emitted = 0

    def _vocab(self, phase: int, label: str) -> list[str]:
        return [f"p{phase}{label[:3]}{i}" for i in range(self.config.vocab_per_class)]

    def phase_of(self, arrival: int) -> int:
        return 0 if arrival < self.config.drift_at_arrival else 1

    def _make_doc(self, rng: random.Random, index: int, phase: int,
                  n_class_tokens: int) -> SimDoc:
        label = rng.choice(self.CLASSES)
        vocab = self._vocab(phase, label)
        words = [rng.choice(vocab) for _ in range(n_class_tokens)]
        words += [f"noise{rng.randrange(self.config.noise_vocab)}"
                  for _ in range(self.config.noise_tokens_per_doc)]
        rng.shuffle(words)
        return SimDoc(
            doc_id=f"sim{index}",
            text=" ".join(words),
            label=label,
            created_at=SIM_T0 + timedelta(seconds=index * self.config.arrival_gap),
            phase=phase,
        )

    def next_doc(self) -> SimDoc:
        doc = self._make_doc(self.rng, self._emitted,
                             self.phase_of(self._emitted),
                             self.config.class_tokens_per_doc)
        self._emitted += 1
        return doc

    def eval_set(self, phase: int, seed: int) -> list[tuple[dict, str]]:
        """Held-out labelled features from one phase's distribution."""
        rng = random.Random(seed * 7919 + phase)
        out = []
        for i in range(self.config.eval_size):
            doc = self._make_doc(rng, -1, phase, self.config.eval_class_tokens)
            out.append((featurize(doc.text, dim=SIM_DIM), doc.label))
        return out


def _accuracy(model, eval_set) -> float:
    hits = 0
    for feats, label in eval_set:
        probs = classifier.predict(model, feats)
        if model.classes[int(probs.argmax())] == label:
            hits += 1
    return hits / len(eval_set)


# ---------------------------------------------------------------------------
# selection strategies

@dataclass
class SimulationConfig:
    budget: int = 300
    retrain_every: int = 10
    arrivals_per_label: int = 4
    pool_capacity: int = 300
    target_accuracy: float = 0.9
    alpha: float = 0.5
    recency_halflife: float = 1800.0  # seconds; ~120 arrivals
    drift: DriftConfig = field(default_factory=DriftConfig)
    hyperparams: Hyperparams = field(default_factory=lambda: Hyperparams(
        learning_rate=0.5, epochs=12, l2=1e-4, batch_size=32))


def run_active_learning(strategy: str, seed: int,
                        config: SimulationConfig | None = None) -> int:
    """Labels consumed until post-drift accuracy reaches the target.

    strategy is 'uncertainty' (priority queue: least confidence + recency)
    or 'random' (uniform over the same arrival window).  Returns the label
    count at first success, or the full budget if the target was never hit.
    """
    cfg = config or SimulationConfig()
    if strategy not in ("uncertainty", "random"):
        raise ValueError(f"unknown strategy: {strategy!r}")
    stream = DriftingStream(seed, cfg.drift)
    pick_rng = random.Random(seed + 5000)
    eval_post = stream.eval_set(phase=1, seed=seed)

    queue = LabelQueue(QueueConfig(
        capacity=cfg.pool_capacity, alpha=cfg.alpha,
        recency_halflife=cfg.recency_halflife, consensus_k=1,
        lease_duration=1e9))
    window: list[SimDoc] = []  # random arm's plain arrival window
    by_id: dict[str, SimDoc] = {}

    labelled: dict[str, SimDoc] = {}
    model = None
    labels_used = 0
    now = SIM_T0

    def model_uncertainty(doc: SimDoc) -> float:
        if model is None:
            return 1.0
        probs = classifier.predict(model, featurize(doc.text, dim=SIM_DIM))
        return classifier.uncertainty(probs)

    def refresh(doc_id: str) -> float | None:
        doc = by_id.get(doc_id)
        return None if doc is None else model_uncertainty(doc)

    while labels_used < cfg.budget:
        for _ in range(cfg.arrivals_per_label):
            doc = stream.next_doc()
            by_id[doc.doc_id] = doc
            now = doc.created_at
            if strategy == "uncertainty":
                queue.offer(doc.doc_id, doc.created_at, model_uncertainty(doc), now)
            else:
                window.append(doc)
                if len(window) > cfg.pool_capacity:
                    window.pop(0)

        if strategy == "uncertainty":
            doc_id = queue.next_for_user("sim", now)
            if doc_id is None:
                continue
            queue.complete("sim", doc_id, now)
            chosen = by_id[doc_id]
        else:
            candidates = [d for d in window if d.doc_id not in labelled]
            if not candidates:
                continue
            chosen = candidates[pick_rng.randrange(len(candidates))]
            window.remove(chosen)

        labelled[chosen.doc_id] = chosen  # the simulated annotator is exact
        labels_used += 1

        if labels_used % cfg.retrain_every == 0:
            examples = [LabelledExample(d.doc_id,
                                        featurize(d.text, dim=SIM_DIM), d.label)
                        for d in labelled.values()]
            if len({ex.label for ex in examples}) >= 2:
                model = classifier.train(examples, cfg.hyperparams,
                                         seed=seed * 31 + labels_used,
                                         dim=SIM_DIM)
                if strategy == "uncertainty":
                    queue.reprioritize(now, refresh)
                past_drift = stream._emitted >= cfg.drift.drift_at_arrival
                if past_drift and _accuracy(model, eval_post) >= cfg.target_accuracy:
                    return labels_used
    return cfg.budget


@dataclass
class EfficiencyResult:
    seeds: list[int]
    uncertainty_labels: list[int]
    random_labels: list[int]

    @property
    def uncertainty_median(self) -> float:
        return statistics.median(self.uncertainty_labels)

    @property
    def random_median(self) -> float:
        return statistics.median(self.random_labels)

    @property
    def ratio(self) -> float:
        return self.uncertainty_median / self.random_median

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["seed", "strategy", "labels_to_target"])
        for seed, labels in zip(self.seeds, self.uncertainty_labels):
            writer.writerow([seed, "uncertainty", labels])
        for seed, labels in zip(self.seeds, self.random_labels):
            writer.writerow([seed, "random", labels])
        return buf.getvalue()


def run_efficiency_comparison(seeds: Iterable[int] = range(20),
                              config: SimulationConfig | None = None) -> EfficiencyResult:
    seeds = list(seeds)
    unc = [run_active_learning("uncertainty", s, config) for s in seeds]
    rnd = [run_active_learning("random", s, config) for s in seeds]
    return EfficiencyResult(seeds, unc, rnd)


# ---------------------------------------------------------------------------
# scripted annotators for the end-to-end replay scenario

POSITIVE_WORDS = ("great", "wonderful", "effective", "relieved", "grateful")
NEGATIVE_WORDS = ("awful", "terrible", "dangerous", "worried", "scary")
NEUTRAL_WORDS = ("update", "report", "appointment")


def planted_mood(text: str) -> str | None:
    lowered = text.lower()
    for word in POSITIVE_WORDS:
        if word in lowered:
            return "pos"
    for word in NEGATIVE_WORDS:
        if word in lowered:
            return "neg"
    for word in NEUTRAL_WORDS:
        if word in lowered:
            return "neu"
    return None


class ScriptedAnnotator:
    """Answers question sequences from the planted mood words, with a
    deterministic per-user error rate."""

    def __init__(self, user_id: str, seed: int, error_rate: float = 0.05):
        self.user_id = user_id
        self.rng = random.Random(seed)
        self.error_rate = error_rate

    def answer(self, question_id: str, text: str) -> str:
        mood = planted_mood(text)
        if question_id == "q1":
            return "yes" if mood else "no"
        answer = mood or "neu"
        if self.rng.random() < self.error_rate:
            answer = self.rng.choice(["pos", "neg", "neu"])
        return answer


def run_scripted_annotation(platform: Platform, project_id: str,
                            annotators: list[ScriptedAnnotator],
                            target_consensus: int,
                            step_seconds: float = 20.0) -> int:
    """Round-robin the annotators until enough consensus labels exist."""
    rt = platform.runtime(project_id)
    resolved = 0
    idle_rounds = 0
    while resolved < target_consensus and idle_rounds < 2:
        progress = False
        for annotator in annotators:
            if resolved >= target_consensus:
                break
            platform.clock.advance(step_seconds)
            session = platform.start_session(project_id, annotator.user_id)
            if session is None:
                continue
            progress = True
            doc_id = session["doc_id"]
            question = session["question"]
            while question is not None:
                answer = annotator.answer(question.question_id, session["text"])
                question, consensus = platform.submit_answer(
                    project_id, annotator.user_id, doc_id,
                    question.question_id, answer)
                if consensus is not None:
                    resolved += 1
        idle_rounds = 0 if progress else idle_rounds + 1
    return resolved


def run_end_to_end(data_dir: str | Path, stream_path: str | Path,
                   project_config: dict, target_consensus: int = 110,
                   annotator_count: int = 3, fsync: bool = True) -> dict:
    """The full deterministic scenario; returns comparable outputs."""
    clock = SimulatedClock(SIM_T0)
    platform = Platform(data_dir, clock=clock, fsync=fsync)
    platform.create_project(project_config)
    pid = project_config["project_id"]

    stats = platform.ingest_stream(
        pid, open_stream(StreamSourceConfig("file_replay", str(stream_path),
                                            speedup=0)))

    annotators = [ScriptedAnnotator(f"u{i}", seed=9000 + i)
                  for i in range(annotator_count)]
    resolved = run_scripted_annotation(platform, pid, annotators,
                                       target_consensus)

    platform.recompute_predictions(pid)
    rt = platform.runtime(pid)
    first = min(s.document.created_at for s in rt.docstore.values())
    last = max(s.document.created_at for s in rt.docstore.values())
    points = platform.trend_points(pid, first - timedelta(hours=1),
                                   last + timedelta(hours=2))
    csv_text = trends_to_csv(points)

    model_versions = sorted({
        record.payload["version"]
        for record in platform.log.replay(0)
        if record.kind == "model_published"
    })
    consensus_list = [
        {"doc_id": c.doc_id, "label": c.label, "support": c.support,
         "total": c.total, "resolved_at": format_timestamp(c.resolved_at)}
        for c in (rt.consensus[d] for d in sorted(rt.consensus))
    ]
    summary = {
        "ingest": stats.as_dict(),
        "resolved": resolved,
        "consensus": consensus_list,
        "model_versions": model_versions,
        "trend_csv": csv_text,
        "fingerprint": platform.state_fingerprint(),
    }
    platform.close()
    return summary
