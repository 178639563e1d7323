"""Black-box predictor contract and in-process synthetic predictors.

Every predictor answers batched queries: a request carries token sequences
plus a target descriptor (which label's or span's probability to return),
and the response carries one scalar score per sequence, in order.  Synthetic
predictors are fully deterministic; their scoring formulas are documented in
docs/protocol.md so an out-of-process server can reproduce them exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

from .perturbation import DEFAULT_MASK_TOKEN
from .types import Task
from .util import stable_unit


class PredictorError(Exception):
    """Base class for predictor failures."""


class MalformedRequestError(PredictorError):
    """The request violates the contract; retrying cannot help."""


class TransportError(PredictorError):
    """A remote call failed after retries; carries how many scores were obtained."""

    def __init__(self, message: str, succeeded: int = 0):
        super().__init__(message)
        self.succeeded = succeeded


@dataclass(frozen=True)
class TargetSpec:
    """Which scalar the predictor must return: a label's or a span's probability."""

    kind: str  # "label" | "span"
    label: str | None = None
    span: tuple[int, int] | None = None

    def to_json(self) -> dict:
        if self.kind == "label":
            return {"kind": "label", "label": self.label}
        return {"kind": "span", "start": self.span[0], "end": self.span[1]}

    @classmethod
    def from_json(cls, obj: dict) -> "TargetSpec":
        if obj.get("kind") == "label":
            return cls(kind="label", label=obj["label"])
        return cls(kind="span", span=(int(obj["start"]), int(obj["end"])))


@dataclass(frozen=True)
class PredictRequest:
    sequences: tuple[tuple[str, ...], ...]
    task: Task
    target: TargetSpec

    def validate(self) -> None:
        if len(self.sequences) < 1:
            raise MalformedRequestError("batch must contain at least one sequence")
        for i, seq in enumerate(self.sequences):
            if len(seq) < 1:
                raise MalformedRequestError(f"sequence {i} is empty")


@dataclass(frozen=True)
class PredictResponse:
    scores: tuple[float, ...]
    # Optional per-sequence candidate list: ((label_or_span, prob), ...) sorted
    # by probability descending.  Spans are (start, end) tuples.
    candidates: tuple[tuple[tuple[object, float], ...], ...] | None = None


class Predictor(Protocol):
    def predict(self, request: PredictRequest) -> PredictResponse: ...


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@dataclass(frozen=True)
class LinearBagPredictor:
    """NLI-style classifier: target-label probability is sigmoid(bias + sum of
    per-token weights over present tokens); the remaining mass is split evenly
    over the other labels."""

    weights: dict[str, float] = field(default_factory=dict)
    bias: float = 0.0
    labels: tuple[str, ...] = ("entailment", "contradiction", "neutral")
    primary_label: str = "entailment"
    mask_token: str = DEFAULT_MASK_TOKEN

    def distribution(self, sequence: tuple[str, ...]) -> dict[str, float]:
        total = self.bias + sum(
            self.weights.get(tok, 0.0) for tok in sequence if tok != self.mask_token
        )
        p = min(1.0, max(0.0, _sigmoid(total)))
        rest = (1.0 - p) / (len(self.labels) - 1)
        return {lab: (p if lab == self.primary_label else rest) for lab in self.labels}

    def predict(self, request: PredictRequest) -> PredictResponse:
        request.validate()
        if request.target.kind != "label":
            raise MalformedRequestError("linear-bag predictor scores labels only")
        scores, cands = [], []
        for seq in request.sequences:
            dist = self.distribution(seq)
            scores.append(dist.get(request.target.label, 0.0))
            ranked = tuple(sorted(dist.items(), key=lambda kv: (-kv[1], kv[0])))
            cands.append(ranked)
        return PredictResponse(scores=tuple(scores), candidates=tuple(cands))


@dataclass(frozen=True)
class QaLayout:
    """Positional structure the synthetic QA predictors were built for: the
    question prefix and each context sentence with its candidate answer span."""

    question_end: int
    sentences: tuple[tuple[int, int], ...]  # (start, end) per sentence
    spans: tuple[tuple[int, int], ...]  # candidate answer span per sentence

    def to_json(self) -> dict:
        return {
            "question_end": self.question_end,
            "sentences": [list(s) for s in self.sentences],
            "spans": [list(s) for s in self.spans],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QaLayout":
        return cls(
            question_end=int(obj["question_end"]),
            sentences=tuple((int(a), int(b)) for a, b in obj["sentences"]),
            spans=tuple((int(a), int(b)) for a, b in obj["spans"]),
        )


@dataclass(frozen=True)
class OverlapQaPredictor:
    """Answers the candidate span whose sentence shares the most tokens with
    the unmasked question; confidence is that overlap ratio.  A fully masked
    question falls back to the uniform confidence 1/num_candidates."""

    layout: QaLayout
    mask_token: str = DEFAULT_MASK_TOKEN

    def span_probs(self, seq: tuple[str, ...]) -> list[float]:
        q = {seq[i] for i in range(self.layout.question_end) if seq[i] != self.mask_token}
        k = len(self.layout.sentences)
        if not q:
            return [1.0 / k] * k
        probs = []
        for start, end in self.layout.sentences:
            m = sum(1 for j in range(start, min(end, len(seq))) if seq[j] != self.mask_token and seq[j] in q)
            probs.append(m / self.layout.question_end)
        return probs

    def predict(self, request: PredictRequest) -> PredictResponse:
        request.validate()
        if request.target.kind != "span":
            raise MalformedRequestError("QA predictor scores spans only")
        scores, cands = [], []
        for seq in request.sequences:
            probs = self.span_probs(seq)
            ranked = sorted(zip(self.layout.spans, probs), key=lambda kv: (-kv[1], kv[0]))
            cands.append(tuple((span, p) for span, p in ranked))
            scores.append(dict(zip(self.layout.spans, probs)).get(request.target.span, 0.0))
        return PredictResponse(scores=tuple(scores), candidates=tuple(cands))


@dataclass(frozen=True)
class DistractorQaPredictor:
    """Overlap-driven QA predictor whose distractor sentence wins whenever the
    question's proper nouns are masked.

    Scoring (see docs/protocol.md): a context token counts toward its sentence
    when it is present and equal to a present question token, with weight
    ``W_kind * (0.5 + u(token))`` where capitalized tokens use entity weight,
    everything else common weight, and u is a sha256 hash of the token mapped
    to [0,1).  Hedge tokens anywhere in the context inflate the normalizer.
    Span probability is sentence score over the sum of scores plus the hedge
    mass; the answered span is the argmax sentence's candidate.
    """

    layout: QaLayout
    entity_weight: float = 2.0
    common_weight: float = 1.0
    base_score: float = 0.5
    hedge_token: str = "reportedly"
    hedge_weight: float = 1.0
    mask_token: str = DEFAULT_MASK_TOKEN

    def _token_weight(self, tok: str) -> float:
        kind = self.entity_weight if tok[:1].isupper() else self.common_weight
        return kind * (0.5 + stable_unit(tok))

    def span_probs(self, seq: tuple[str, ...]) -> list[float]:
        q = {seq[i] for i in range(self.layout.question_end) if seq[i] != self.mask_token}
        hedges = sum(
            1
            for j in range(self.layout.question_end, len(seq))
            if seq[j] == self.hedge_token
        )
        hedge_mass = hedges * self.hedge_weight * (0.5 + stable_unit(self.hedge_token))
        scores = []
        for start, end in self.layout.sentences:
            m = sum(
                self._token_weight(seq[j])
                for j in range(start, min(end, len(seq)))
                if seq[j] != self.mask_token and seq[j] in q
            )
            scores.append(self.base_score + m)
        denom = sum(scores) + hedge_mass
        return [s / denom for s in scores]

    def predict(self, request: PredictRequest) -> PredictResponse:
        request.validate()
        if request.target.kind != "span":
            raise MalformedRequestError("QA predictor scores spans only")
        scores, cands = [], []
        for seq in request.sequences:
            probs = self.span_probs(seq)
            ranked = sorted(zip(self.layout.spans, probs), key=lambda kv: (-kv[1], kv[0]))
            cands.append(tuple((span, p) for span, p in ranked))
            scores.append(dict(zip(self.layout.spans, probs)).get(request.target.span, 0.0))
        return PredictResponse(scores=tuple(scores), candidates=tuple(cands))


def build_predictor(spec: dict) -> Predictor:
    """Instantiate a predictor from a JSON spec ({"type": ..., ...})."""
    kind = spec.get("type")
    if kind == "linear_bag":
        return LinearBagPredictor(
            weights=dict(spec.get("weights", {})),
            bias=float(spec.get("bias", 0.0)),
            labels=tuple(spec.get("labels", ("entailment", "contradiction", "neutral"))),
            primary_label=spec.get("primary_label", "entailment"),
            mask_token=spec.get("mask_token", DEFAULT_MASK_TOKEN),
        )
    if kind == "overlap_qa":
        return OverlapQaPredictor(
            layout=QaLayout.from_json(spec["layout"]),
            mask_token=spec.get("mask_token", DEFAULT_MASK_TOKEN),
        )
    if kind == "distractor_qa":
        return DistractorQaPredictor(
            layout=QaLayout.from_json(spec["layout"]),
            entity_weight=float(spec.get("entity_weight", 2.0)),
            common_weight=float(spec.get("common_weight", 1.0)),
            base_score=float(spec.get("base_score", 0.5)),
            hedge_token=spec.get("hedge_token", "reportedly"),
            hedge_weight=float(spec.get("hedge_weight", 1.0)),
            mask_token=spec.get("mask_token", DEFAULT_MASK_TOKEN),
        )
    if kind == "remote":
        from .client import RemotePredictor

        return RemotePredictor(
            base_url=spec["url"],
            token=spec.get("token"),
            batch_size=int(spec.get("batch_size", 512)),
            max_in_flight=int(spec.get("max_in_flight", 4)),
            retries=int(spec.get("retries", 3)),
        )
    raise ValueError(f"unknown predictor type: {kind!r}")
