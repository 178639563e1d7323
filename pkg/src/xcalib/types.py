"""Shared data model: tokens, predictions, annotated instances, attributions."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Task(str, Enum):
    QA = "qa"
    NLI = "nli"


class Segment(str, Enum):
    QUESTION = "question"
    CONTEXT = "context"
    ANSWER = "answer"
    PREMISE = "premise"
    HYPOTHESIS = "hypothesis"


SEGMENTS_BY_TASK: dict[Task, tuple[Segment, ...]] = {
    Task.QA: (Segment.QUESTION, Segment.CONTEXT, Segment.ANSWER),
    Task.NLI: (Segment.PREMISE, Segment.HYPOTHESIS),
}

PROB_SUM_TOL = 1e-6
LOCAL_ACCURACY_TOL = 1e-4


class ExplainerKind(str, Enum):
    LIME = "lime"
    SHAP = "shap"
    EXACT = "exact"


@dataclass(frozen=True)
class Token:
    """One input token with optional Penn Treebank tag and its segment."""

    text: str
    segment: Segment
    raw_tag: str | None = None


@dataclass(frozen=True)
class Prediction:
    """The base model's committed output for one instance.

    ``label_or_span`` is a class label string for NLI or a half-open
    ``(start, end)`` token range for QA.  ``top_probs`` is sorted by
    probability, descending; for NLI it is the full class distribution.
    """

    task: Task
    label_or_span: str | tuple[int, int]
    top_probs: tuple[tuple[str, float], ...]

    @property
    def span(self) -> tuple[int, int]:
        if not isinstance(self.label_or_span, tuple):
            raise TypeError("prediction does not carry a span")
        return self.label_or_span

    @property
    def label(self) -> str:
        if not isinstance(self.label_or_span, str):
            raise TypeError("prediction does not carry a label")
        return self.label_or_span

    @property
    def top_probability(self) -> float:
        return self.top_probs[0][1]

    def probability_of(self, label: str) -> float | None:
        for name, p in self.top_probs:
            if name == label:
                return p
        return None


@dataclass(frozen=True)
class AnnotatedInstance:
    """One example: tokens, gold target, base prediction, correctness label."""

    id: str
    tokens: tuple[Token, ...]
    gold: tuple[str, ...] | str
    prediction: Prediction
    correct: bool
    quality: float

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def task(self) -> Task:
        return self.prediction.task

    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]

    def segment_indices(self, *segments: Segment) -> list[int]:
        wanted = set(segments)
        return [i for i, t in enumerate(self.tokens) if t.segment in wanted]


@dataclass(frozen=True)
class Attribution:
    """Additive token attributions: intercept ``phi0`` plus one value per token."""

    phi0: float
    phis: tuple[float, ...]
    explainer: ExplainerKind
    config_digest: str = ""

    def __len__(self) -> int:
        return len(self.phis)

    @property
    def total(self) -> float:
        return self.phi0 + sum(self.phis)


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule}"


def validate_instance(instance: AnnotatedInstance, task: Task) -> list[Violation]:
    """Check every type invariant; returns an empty list iff all hold.

    Violations are data, not failures: callers decide whether to reject.
    """
    out: list[Violation] = []
    if len(instance.tokens) < 1:
        out.append(Violation("tokens", "token count must be >= 1"))
    allowed = set(SEGMENTS_BY_TASK[task])
    for i, tok in enumerate(instance.tokens):
        if not tok.text:
            out.append(Violation(f"tokens[{i}].text", "text is empty"))
        if tok.segment not in allowed:
            out.append(
                Violation(f"tokens[{i}].segment", f"segment {tok.segment.value} not valid for task {task.value}")
            )

    pred = instance.prediction
    if pred.task != task:
        out.append(Violation("prediction.task", f"prediction task {pred.task.value} != {task.value}"))
    if len(pred.top_probs) < 1:
        out.append(Violation("prediction.top_probs", "must contain at least one entry"))
    for j, (_, p) in enumerate(pred.top_probs):
        if not 0.0 <= p <= 1.0:
            out.append(Violation(f"prediction.top_probs[{j}]", f"probability {p} outside [0,1]"))

    if task == Task.NLI:
        total = sum(p for _, p in pred.top_probs)
        if abs(total - 1.0) > PROB_SUM_TOL:
            out.append(Violation("prediction.top_probs", f"probabilities sum to {total:.6f}, not 1"))
        if not isinstance(pred.label_or_span, str):
            out.append(Violation("prediction.label_or_span", "NLI prediction must be a label"))
        if instance.correct != (instance.quality == 1.0):
            out.append(Violation("correct", "NLI requires correct == (quality == 1.0)"))
    else:
        if not isinstance(pred.label_or_span, tuple):
            out.append(Violation("prediction.label_or_span", "QA prediction must be a token span"))
        else:
            s, e = pred.label_or_span
            n = len(instance.tokens)
            if not (0 <= s < e <= n):
                out.append(Violation("prediction.label_or_span", f"span [{s},{e}) outside token range [0,{n})"))
            else:
                for i in range(s, e):
                    if instance.tokens[i].segment not in (Segment.CONTEXT, Segment.ANSWER):
                        out.append(Violation("prediction.label_or_span", "span outside context"))
                        break
        if instance.correct and instance.quality < 1.0 - 1e-9:
            out.append(Violation("quality", "exact-match correct QA instance must have quality 1.0"))

    if not 0.0 <= instance.quality <= 1.0:
        out.append(Violation("quality", f"quality {instance.quality} outside [0,1]"))
    return out
