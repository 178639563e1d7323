"""Shared instance builders and tiny deterministic predictors for tests."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable


from xcalib.blackbox import PredictResponse
from xcalib.perturbation import DEFAULT_MASK_TOKEN
from xcalib.types import AnnotatedInstance, Prediction, Segment, Task, Token
from xcalib.util import stable_unit


@dataclass
class FunctionPredictor:
    """Wraps a plain function over token sequences as a predictor."""

    fn: Callable[[tuple[str, ...]], float]

    def predict(self, request):
        request.validate()
        return PredictResponse(scores=tuple(self.fn(seq) for seq in request.sequences))


def presence(seq: tuple[str, ...], mask_token: str = DEFAULT_MASK_TOKEN) -> tuple[int, ...]:
    return tuple(0 if tok == mask_token else 1 for tok in seq)


def random_table_predictor(salt: str) -> FunctionPredictor:
    """A deterministic 'random' set function: the score depends only on which
    positions are present, via a hash."""

    def fn(seq: tuple[str, ...]) -> float:
        return stable_unit(salt + ":" + "".join(map(str, presence(seq))))

    return FunctionPredictor(fn)


def linear_predictor(weights: list[float], bias: float = 0.0) -> FunctionPredictor:
    def fn(seq: tuple[str, ...]) -> float:
        bits = presence(seq)
        return bias + sum(w * b for w, b in zip(weights, bits))

    return FunctionPredictor(fn)


def generic_qa_instance(n: int, instance_id: str = "i0") -> AnnotatedInstance:
    """All-context QA instance with distinct token texts and span (0, 1)."""
    tokens = tuple(Token(text=f"t{i}", segment=Segment.CONTEXT, raw_tag="NN") for i in range(n))
    return AnnotatedInstance(
        id=instance_id,
        tokens=tokens,
        gold=("x",),
        prediction=Prediction(task=Task.QA, label_or_span=(0, 1), top_probs=(("1", 0.5),)),
        correct=False,
        quality=0.0,
    )


def nli_instance(
    premise: list[str],
    hypothesis: list[str],
    label: str = "entailment",
    gold: str = "entailment",
    dist: tuple[tuple[str, float], ...] = (("entailment", 0.7), ("contradiction", 0.2), ("neutral", 0.1)),
    tags: list[str] | None = None,
    instance_id: str = "n0",
) -> AnnotatedInstance:
    words = premise + hypothesis
    segs = [Segment.PREMISE] * len(premise) + [Segment.HYPOTHESIS] * len(hypothesis)
    all_tags = tags or ["NN"] * len(words)
    tokens = tuple(Token(text=w, segment=s, raw_tag=t) for w, s, t in zip(words, segs, all_tags))
    correct = label == gold
    return AnnotatedInstance(
        id=instance_id,
        tokens=tokens,
        gold=gold,
        prediction=Prediction(task=Task.NLI, label_or_span=label, top_probs=dist),
        correct=correct,
        quality=1.0 if correct else 0.0,
    )


def qa_instance(
    question: list[str],
    context: list[str],
    span: tuple[int, int],
    gold: tuple[str, ...] = ("x",),
    top_probs: tuple[tuple[str, float], ...] = (("1", 0.6), ("2", 0.2)),
    tags: list[str] | None = None,
    instance_id: str = "q0",
) -> AnnotatedInstance:
    words = question + context
    all_tags = tags or ["NN"] * len(words)
    tokens = []
    for i, (w, t) in enumerate(zip(words, all_tags)):
        if i < len(question):
            seg = Segment.QUESTION
        elif span[0] <= i < span[1]:
            seg = Segment.ANSWER
        else:
            seg = Segment.CONTEXT
        tokens.append(Token(text=w, segment=seg, raw_tag=t))
    predicted = " ".join(words[span[0] : span[1]]).lower()
    correct = any(predicted == g.lower() for g in gold)
    return AnnotatedInstance(
        id=instance_id,
        tokens=tuple(tokens),
        gold=gold,
        prediction=Prediction(task=Task.QA, label_or_span=span, top_probs=top_probs),
        correct=correct,
        quality=1.0 if correct else 0.0,
    )
