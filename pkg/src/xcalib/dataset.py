"""Line-delimited dataset records and ingestion.

Each line is a JSON object:

    {"id": "...", "task": "qa"|"nli",
     "tokens": [{"text": "...", "tag": "NNP"|null, "segment": "question"|...}],
     "gold": ["answer string", ...] (QA) | "label" (NLI),
     "prediction": {"span": [start, end] | "label": "...",
                    "top_probs": [["label-or-rank", prob], ...]}}

Correctness and quality are computed here from gold plus the recorded
prediction: exact match after lowercasing and whitespace normalization for
QA (quality is the best token F1 over the gold references), label equality
for NLI.  QA tokens inside the predicted span are reassigned the answer
segment so the three-segment scheme is well defined; the reassignment is
idempotent, so records round-trip bit-identically.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .evaluation import token_f1
from .types import AnnotatedInstance, Prediction, Segment, Task, Token, validate_instance


class IngestError(ValueError):
    def __init__(self, line_no: int, field: str, message: str):
        super().__init__(f"line {line_no}: {field}: {message}")
        self.line_no = line_no
        self.field = field


def _normalize(text: str) -> list[str]:
    return text.lower().split()


def qa_correctness(predicted_text: str, golds: Iterable[str]) -> tuple[bool, float]:
    pred_tokens = _normalize(predicted_text)
    correct = False
    quality = 0.0
    for gold in golds:
        gold_tokens = _normalize(gold)
        if pred_tokens == gold_tokens:
            correct = True
        quality = max(quality, token_f1(pred_tokens, gold_tokens))
    return correct, quality


def record_to_instance(obj: dict, line_no: int = 0) -> AnnotatedInstance:
    for key in ("id", "task", "tokens", "gold", "prediction"):
        if key not in obj:
            raise IngestError(line_no, key, "missing field")
    try:
        task = Task(obj["task"])
    except ValueError:
        raise IngestError(line_no, "task", f"unknown task {obj['task']!r}")

    pred_obj = obj["prediction"]
    if "top_probs" not in pred_obj:
        raise IngestError(line_no, "prediction.top_probs", "missing field")
    top_probs = tuple((str(k), float(p)) for k, p in pred_obj["top_probs"])

    if task == Task.QA:
        if "span" not in pred_obj:
            raise IngestError(line_no, "prediction.span", "missing field")
        span = (int(pred_obj["span"][0]), int(pred_obj["span"][1]))
        prediction = Prediction(task=task, label_or_span=span, top_probs=top_probs)
    else:
        if "label" not in pred_obj:
            raise IngestError(line_no, "prediction.label", "missing field")
        prediction = Prediction(task=task, label_or_span=str(pred_obj["label"]), top_probs=top_probs)

    tokens: list[Token] = []
    for i, tok in enumerate(obj["tokens"]):
        if "text" not in tok or "segment" not in tok:
            raise IngestError(line_no, f"tokens[{i}]", "token needs text and segment")
        try:
            segment = Segment(tok["segment"])
        except ValueError:
            raise IngestError(line_no, f"tokens[{i}].segment", f"unknown segment {tok['segment']!r}")
        if task == Task.QA and segment == Segment.CONTEXT:
            s, e = prediction.label_or_span
            if s <= i < e:
                segment = Segment.ANSWER
        tokens.append(Token(text=str(tok["text"]), segment=segment, raw_tag=tok.get("tag")))

    if task == Task.QA:
        golds = tuple(str(g) for g in obj["gold"])
        s, e = prediction.label_or_span
        predicted_text = " ".join(t.text for t in tokens[s:e])
        correct, quality = qa_correctness(predicted_text, golds)
        gold: tuple[str, ...] | str = golds
    else:
        gold = str(obj["gold"])
        correct = prediction.label_or_span == gold
        quality = 1.0 if correct else 0.0

    return AnnotatedInstance(
        id=str(obj["id"]), tokens=tuple(tokens), gold=gold,
        prediction=prediction, correct=correct, quality=quality,
    )


def instance_to_record(instance: AnnotatedInstance) -> dict:
    pred = instance.prediction
    pred_obj: dict = {"top_probs": [[k, p] for k, p in pred.top_probs]}
    if instance.task == Task.QA:
        pred_obj["span"] = list(pred.label_or_span)
        gold: list[str] | str = list(instance.gold)
    else:
        pred_obj["label"] = pred.label_or_span
        gold = instance.gold
    return {
        "id": instance.id,
        "task": instance.task.value,
        "tokens": [
            {"text": t.text, "tag": t.raw_tag, "segment": t.segment.value}
            for t in instance.tokens
        ],
        "gold": gold,
        "prediction": pred_obj,
    }


def _parse_lines(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(line_no, "record", f"invalid JSON: {exc}") from exc
            yield line_no, obj


def ingest(path: str | Path) -> list[AnnotatedInstance]:
    """Read and validate a line-delimited dataset; errors carry line numbers."""
    instances = []
    for line_no, obj in _parse_lines(path):
        instance = record_to_instance(obj, line_no)
        violations = validate_instance(instance, instance.task)
        if violations:
            first = violations[0]
            raise IngestError(line_no, first.field, first.rule)
        instances.append(instance)
    return instances


def validate_file(path: str | Path) -> list[dict]:
    """Collect every violation in a dataset file instead of stopping at the
    first; each entry carries the line number, field and rule."""
    problems: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append({"line": line_no, "field": "record", "rule": f"invalid JSON: {exc}"})
                continue
            try:
                instance = record_to_instance(obj, line_no)
            except IngestError as exc:
                problems.append({"line": exc.line_no, "field": exc.field, "rule": str(exc)})
                continue
            for violation in validate_instance(instance, instance.task):
                problems.append({"line": line_no, "field": violation.field, "rule": violation.rule})
    return problems


def write_instances(instances: Iterable[AnnotatedInstance], path: str | Path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(instance_to_record(inst), sort_keys=True) + "\n")
            count += 1
    return count
