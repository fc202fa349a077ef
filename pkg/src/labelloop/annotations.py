"""Projects, question sequences, annotation sessions and consensus.

A question sequence is a DAG: each (question, answer) pair either points at
a follow-up question or, with no transition entry, terminates the session.
Every answer appends one immutable row; a completed root-to-terminal path
is one labelling session.  Consensus over a document is a strict majority
of the completing users' answers on the project's designated sentiment
question, mapped to trend classes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Optional

from .clock import format_timestamp, parse_timestamp
from .filterlang import And, FilterQuery, Keyword, Or, ParseError, keyword, parse_query, print_query
from .labelqueue import QueueConfig
from .classifier import RetrainConfig

TREND_CLASSES = ("positive", "negative", "neutral", "irrelevant")

SESSION_COMPLETE = "__complete__"


@dataclass(frozen=True)
class Answer:
    answer_id: str
    label: str


@dataclass(frozen=True)
class Question:
    question_id: str
    prompt: str
    answers: tuple[Answer, ...]

    def answer_ids(self) -> list[str]:
        return [a.answer_id for a in self.answers]


@dataclass(frozen=True)
class QuestionSequence:
    questions: dict[str, Question]
    transitions: dict[tuple[str, str], str]  # (question, answer) -> next question
    start: str


def validate_sequence(seq: QuestionSequence) -> list[str]:
    """All violations found, empty when the sequence is well-formed."""
    violations: list[str] = []
    if seq.start not in seq.questions:
        violations.append(f"start question {seq.start!r} does not exist")
    for q in seq.questions.values():
        ids = q.answer_ids()
        if not ids:
            violations.append(f"question {q.question_id!r} has no answers")
        for aid in ids:
            if ids.count(aid) > 1:
                violations.append(
                    f"duplicate answer id {aid!r} in question {q.question_id!r}")
                break
    for (qid, aid), target in seq.transitions.items():
        if qid not in seq.questions:
            violations.append(f"transition from unknown question {qid!r}")
            continue
        if aid not in seq.questions[qid].answer_ids():
            violations.append(
                f"transition key ({qid!r}, {aid!r}) references no answer of {qid!r}")
        if target not in seq.questions:
            violations.append(
                f"transition ({qid!r}, {aid!r}) targets unknown question {target!r}")

    adjacency: dict[str, set[str]] = {qid: set() for qid in seq.questions}
    for (qid, _), target in seq.transitions.items():
        if qid in adjacency and target in seq.questions:
            adjacency[qid].add(target)

    # cycle detection by coloring
    WHITE, GREY, BLACK = 0, 1, 2
    color = {qid: WHITE for qid in seq.questions}

    def visit(node: str) -> bool:
        color[node] = GREY
        for nxt in adjacency[node]:
            if color[nxt] == GREY:
                return True
            if color[nxt] == WHITE and visit(nxt):
                return True
        color[node] = BLACK
        return False

    for qid in seq.questions:
        if color[qid] == WHITE and visit(qid):
            violations.append("transition graph contains a cycle")
            break

    if seq.start in seq.questions:
        reachable = set()
        stack = [seq.start]
        while stack:
            node = stack.pop()
            if node in reachable:
                continue
            reachable.add(node)
            stack.extend(adjacency.get(node, ()))
        for qid in sorted(seq.questions):
            if qid not in reachable:
                violations.append(f"question {qid!r} unreachable from start")
    return violations


@dataclass(frozen=True)
class AnnotationRow:
    user_id: str
    doc_id: str
    project_id: str
    question_id: str
    answer_id: str
    answered_at: datetime

    def to_json_dict(self) -> dict:
        return {
            "user_id": self.user_id, "doc_id": self.doc_id,
            "project_id": self.project_id, "question_id": self.question_id,
            "answer_id": self.answer_id,
            "answered_at": format_timestamp(self.answered_at),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "AnnotationRow":
        return AnnotationRow(d["user_id"], d["doc_id"], d["project_id"],
                             d["question_id"], d["answer_id"],
                             parse_timestamp(d["answered_at"]))


@dataclass(frozen=True)
class ConsensusLabel:
    """Resolved class for a document; label None means undecided."""

    doc_id: str
    project_id: str
    label: Optional[str]
    support: int
    total: int
    resolved_at: datetime


def majority_vote(votes: Iterable[str]) -> tuple[Optional[str], int, int]:
    """Strict-majority winner over the votes, or (None, 0, total) on a tie."""
    votes = list(votes)
    total = len(votes)
    counts: dict[str, int] = {}
    for v in votes:
        counts[v] = counts.get(v, 0) + 1
    if counts:
        winner = max(counts, key=lambda c: (counts[c], c))
        if 2 * counts[winner] > total:
            return winner, counts[winner], total
    return None, 0, total


class ConfigError(ValueError):
    """Project config rejected; carries all violations for the admin UI."""

    def __init__(self, violations: list[dict]):
        super().__init__("; ".join(v["message"] for v in violations))
        self.violations = violations


@dataclass
class Project:
    project_id: str
    title: str
    query: FilterQuery  # compiled: keyword list merged with the query string
    query_source: str  # the query string as configured (may be empty)
    keywords: tuple[str, ...]
    sequence: QuestionSequence
    sentiment_question: str
    class_map: dict[str, str]  # answer_id of sentiment question -> trend class
    queue_config: QueueConfig = field(default_factory=QueueConfig)
    retrain_config: RetrainConfig = field(default_factory=RetrainConfig)

    @property
    def canonical_query(self) -> str:
        """What the API echoes back: the compiled query, fully parenthesized."""
        return print_query(self.query)

    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.class_map.values())))


def _compile_query(keywords: tuple[str, ...], query_source: str) -> FilterQuery:
    keyword_query: FilterQuery | None = None
    if keywords:
        kws = [keyword(k) for k in keywords]
        keyword_query = kws[0] if len(kws) == 1 else Or(tuple(kws))
    parsed = parse_query(query_source) if query_source.strip() else None
    if keyword_query is not None and parsed is not None:
        return And((keyword_query, parsed))
    chosen = keyword_query if keyword_query is not None else parsed
    if chosen is None:
        raise ParseError("project needs keywords or a query", 0)
    return chosen


def load_project(config: dict) -> Project:
    """Build a Project from its JSON config, collecting every violation."""
    violations: list[dict] = []

    project_id = config.get("project_id") or ""
    title = config.get("title") or project_id
    if not project_id:
        violations.append({"code": "invalid_config", "message": "project_id missing"})

    keywords = tuple(str(k) for k in config.get("keywords", []))
    query_source = config.get("query", "")
    query = None
    try:
        query = _compile_query(keywords, query_source)
    except ParseError as exc:
        violations.append({"code": "parse_error", "message": exc.message,
                           "offset": exc.offset})

    seq_cfg = config.get("question_sequence") or {}
    questions: dict[str, Question] = {}
    for q in seq_cfg.get("questions", []):
        qid = q.get("question_id", "")
        if qid in questions:
            violations.append({"code": "invalid_sequence",
                               "message": f"duplicate question id {qid!r}"})
            continue
        answers = tuple(Answer(a["answer_id"], a.get("label", a["answer_id"]))
                        for a in q.get("answers", []))
        questions[qid] = Question(qid, q.get("prompt", qid), answers)
    transitions = {}
    for t in seq_cfg.get("transitions", []):
        transitions[(t["question_id"], t["answer_id"])] = t["next_question_id"]
    sequence = QuestionSequence(questions, transitions, seq_cfg.get("start", ""))
    for message in validate_sequence(sequence):
        violations.append({"code": "invalid_sequence", "message": message})

    sentiment_question = config.get("sentiment_question", "")
    class_map = dict(config.get("class_map", {}))
    sq = sequence.questions.get(sentiment_question)
    if sq is None:
        violations.append({"code": "invalid_config",
                           "message": f"sentiment_question {sentiment_question!r} not in sequence"})
    else:
        for aid in sq.answer_ids():
            if aid not in class_map:
                violations.append({"code": "invalid_config",
                                   "message": f"class_map misses answer {aid!r}"})
        for aid, cls in class_map.items():
            if cls not in TREND_CLASSES:
                violations.append({"code": "invalid_config",
                                   "message": f"class_map value {cls!r} is not a trend class"})

    queue_config = QueueConfig(**config.get("queue_config", {}))
    try:
        queue_config.validate()
    except ValueError as exc:
        violations.append({"code": "invalid_config", "message": str(exc)})
    retrain_config = RetrainConfig(**config.get("retrain_config", {}))

    if violations:
        raise ConfigError(violations)
    return Project(project_id=project_id, title=title, query=query,
                   query_source=query_source, keywords=keywords,
                   sequence=sequence, sentiment_question=sentiment_question,
                   class_map=class_map, queue_config=queue_config,
                   retrain_config=retrain_config)


def project_to_config(project: Project) -> dict:
    """Inverse of load_project, used to persist admin-created projects."""
    seq = project.sequence
    return {
        "project_id": project.project_id,
        "title": project.title,
        "keywords": list(project.keywords),
        "query": project.query_source,
        "question_sequence": {
            "start": seq.start,
            "questions": [
                {"question_id": q.question_id, "prompt": q.prompt,
                 "answers": [{"answer_id": a.answer_id, "label": a.label}
                             for a in q.answers]}
                for q in seq.questions.values()
            ],
            "transitions": [
                {"question_id": qid, "answer_id": aid, "next_question_id": target}
                for (qid, aid), target in seq.transitions.items()
            ],
        },
        "sentiment_question": project.sentiment_question,
        "class_map": dict(project.class_map),
        "queue_config": {
            "capacity": project.queue_config.capacity,
            "alpha": project.queue_config.alpha,
            "recency_halflife": project.queue_config.recency_halflife,
            "consensus_k": project.queue_config.consensus_k,
            "lease_duration": project.queue_config.lease_duration,
        },
        "retrain_config": {
            "batch_threshold": project.retrain_config.batch_threshold,
            "max_interval": project.retrain_config.max_interval,
            "uncertainty_method": project.retrain_config.uncertainty_method,
        },
    }


# ---------------------------------------------------------------------------
# sessions

class SessionError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class Session:
    user_id: str
    doc_id: str
    project_id: str
    current_question: str
    rows: list[AnnotationRow] = field(default_factory=list)
    complete: bool = False


class SessionTracker:
    """Active sessions plus the permanent completed-pair record."""

    def __init__(self, project: Project):
        self.project = project
        self.active: dict[tuple[str, str], Session] = {}
        self.completed_pairs: set[tuple[str, str]] = set()

    def begin(self, user_id: str, doc_id: str) -> Session:
        key = (user_id, doc_id)
        if key in self.completed_pairs:
            raise SessionError("already_labelled",
                               f"{user_id} already completed {doc_id}")
        session = Session(user_id, doc_id, self.project.project_id,
                          self.project.sequence.start)
        self.active[key] = session
        return session

    def answer(self, user_id: str, doc_id: str, question_id: str,
               answer_id: str, now: datetime) -> tuple[Session, str]:
        """Record one answer; returns the session and the next question id
        (SESSION_COMPLETE when the path terminated)."""
        session = self.active.get((user_id, doc_id))
        if session is None:
            raise SessionError("no_session", f"no active session for {user_id} on {doc_id}")
        if session.complete:
            raise SessionError("out_of_order", "session already complete")
        if question_id != session.current_question:
            raise SessionError("out_of_order",
                               f"expected answer to {session.current_question!r}, got {question_id!r}")
        question = self.project.sequence.questions[question_id]
        if answer_id not in question.answer_ids():
            raise SessionError("unknown_answer",
                               f"{answer_id!r} is not an answer of {question_id!r}")
        row = AnnotationRow(user_id, doc_id, self.project.project_id,
                            question_id, answer_id, now)
        session.rows.append(row)
        nxt = self.project.sequence.transitions.get((question_id, answer_id))
        if nxt is None:
            session.complete = True
            self.completed_pairs.add((user_id, doc_id))
            del self.active[(user_id, doc_id)]
            return session, SESSION_COMPLETE
        session.current_question = nxt
        return session, nxt

    def abandon(self, user_id: str, doc_id: str) -> None:
        """Drop an active session (lease expiry); its rows stay in the log."""
        self.active.pop((user_id, doc_id), None)


def sentiment_votes(rows: Iterable[AnnotationRow], project: Project,
                    completed_pairs: set[tuple[str, str]]) -> list[str]:
    """Trend-class votes for one document: each completing user's answer on
    the designated question, mapped through class_map."""
    votes = []
    for row in rows:
        if (row.user_id, row.doc_id) not in completed_pairs:
            continue
        if row.question_id != project.sentiment_question:
            continue
        cls = project.class_map.get(row.answer_id)
        if cls is not None:
            votes.append(cls)
    return votes


def resolve_consensus(doc_id: str, project: Project,
                      rows: Iterable[AnnotationRow],
                      completed_pairs: set[tuple[str, str]],
                      now: datetime) -> ConsensusLabel:
    """Strict majority over completed sessions' sentiment votes."""
    doc_rows = [r for r in rows if r.doc_id == doc_id]
    if not any((r.user_id, r.doc_id) in completed_pairs for r in doc_rows):
        raise SessionError("no_sessions", f"no completed sessions for {doc_id}")
    votes = sentiment_votes(doc_rows, project, completed_pairs)
    label, support, total = majority_vote(votes)
    return ConsensusLabel(doc_id, project.project_id, label, support, total, now)
