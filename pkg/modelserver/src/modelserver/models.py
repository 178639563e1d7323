"""Built-in synthetic models implementing the formulas in docs/protocol.md.

Each model maps (target, sequences) to per-sequence scores plus ranked
candidates.  Everything is deterministic and closed-form so a client-side
twin can reproduce the numbers exactly.
"""

from __future__ import annotations

import hashlib
import importlib
import math
from dataclasses import dataclass, field
from typing import Callable

DEFAULT_MASK = "<mask>"


def stable_unit(text: str) -> float:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


class ModelError(Exception):
    """Raised when the underlying model cannot score a request."""


@dataclass(frozen=True)
class LinearBagModel:
    weights: dict[str, float] = field(default_factory=dict)
    bias: float = 0.0
    labels: tuple[str, ...] = ("entailment", "contradiction", "neutral")
    primary_label: str = "entailment"
    mask_token: str = DEFAULT_MASK

    def score_batch(self, target: dict, sequences: list[list[str]]):
        if target.get("kind") != "label":
            raise ModelError("linear_bag scores labels only")
        wanted = target.get("label")
        scores, candidates = [], []
        for seq in sequences:
            total = self.bias + sum(
                self.weights.get(tok, 0.0) for tok in seq if tok != self.mask_token
            )
            p = min(1.0, max(0.0, sigmoid(total)))
            rest = (1.0 - p) / (len(self.labels) - 1)
            dist = {lab: (p if lab == self.primary_label else rest) for lab in self.labels}
            ranked = sorted(dist.items(), key=lambda kv: (-kv[1], kv[0]))
            candidates.append([[lab, prob] for lab, prob in ranked])
            scores.append(dist.get(wanted, 0.0))
        return scores, candidates


def _span_of(target: dict) -> tuple[int, int]:
    if target.get("kind") != "span":
        raise ModelError("QA models score spans only")
    return int(target["start"]), int(target["end"])


@dataclass(frozen=True)
class OverlapQaModel:
    question_end: int
    sentences: tuple[tuple[int, int], ...]
    spans: tuple[tuple[int, int], ...]
    mask_token: str = DEFAULT_MASK

    def _probs(self, seq: list[str]) -> list[float]:
        q = {seq[i] for i in range(self.question_end) if seq[i] != self.mask_token}
        if not q:
            return [1.0 / len(self.sentences)] * len(self.sentences)
        probs = []
        for start, end in self.sentences:
            hits = sum(
                1 for j in range(start, min(end, len(seq)))
                if seq[j] != self.mask_token and seq[j] in q
            )
            probs.append(hits / self.question_end)
        return probs

    def score_batch(self, target: dict, sequences: list[list[str]]):
        span = _span_of(target)
        scores, candidates = [], []
        for seq in sequences:
            probs = self._probs(seq)
            ranked = sorted(zip(self.spans, probs), key=lambda kv: (-kv[1], kv[0]))
            candidates.append([[list(s), p] for s, p in ranked])
            scores.append(dict(zip(self.spans, probs)).get(span, 0.0))
        return scores, candidates


@dataclass(frozen=True)
class DistractorQaModel:
    question_end: int
    sentences: tuple[tuple[int, int], ...]
    spans: tuple[tuple[int, int], ...]
    entity_weight: float = 2.0
    common_weight: float = 1.0
    base_score: float = 0.5
    hedge_token: str = "reportedly"
    hedge_weight: float = 1.0
    mask_token: str = DEFAULT_MASK

    def _weight(self, tok: str) -> float:
        scale = self.entity_weight if tok[:1].isupper() else self.common_weight
        return scale * (0.5 + stable_unit(tok))

    def _probs(self, seq: list[str]) -> list[float]:
        q = {seq[i] for i in range(self.question_end) if seq[i] != self.mask_token}
        hedges = sum(
            1 for j in range(self.question_end, len(seq)) if seq[j] == self.hedge_token
        )
        hedge_mass = hedges * self.hedge_weight * (0.5 + stable_unit(self.hedge_token))
        scores = []
        for start, end in self.sentences:
            m = sum(
                self._weight(seq[j])
                for j in range(start, min(end, len(seq)))
                if seq[j] != self.mask_token and seq[j] in q
            )
            scores.append(self.base_score + m)
        denom = sum(scores) + hedge_mass
        return [s / denom for s in scores]

    def score_batch(self, target: dict, sequences: list[list[str]]):
        span = _span_of(target)
        scores, candidates = [], []
        for seq in sequences:
            probs = self._probs(seq)
            ranked = sorted(zip(self.spans, probs), key=lambda kv: (-kv[1], kv[0]))
            candidates.append([[list(s), p] for s, p in ranked])
            scores.append(dict(zip(self.spans, probs)).get(span, 0.0))
        return scores, candidates


@dataclass(frozen=True)
class PluginModel:
    """Adapter for a user callable: fn(sequences, target, task) returning a
    list of scores or a dict with "scores" and optional "candidates"."""

    fn: Callable
    task: str

    def score_batch(self, target: dict, sequences: list[list[str]]):
        out = self.fn(sequences, target, self.task)
        if isinstance(out, dict):
            return list(out["scores"]), out.get("candidates")
        return list(out), None


def build_model(spec: dict):
    kind = spec.get("type")
    if kind == "linear_bag":
        return LinearBagModel(
            weights=dict(spec.get("weights", {})),
            bias=float(spec.get("bias", 0.0)),
            labels=tuple(spec.get("labels", ("entailment", "contradiction", "neutral"))),
            primary_label=spec.get("primary_label", "entailment"),
            mask_token=spec.get("mask_token", DEFAULT_MASK),
        )
    if kind in ("overlap_qa", "distractor_qa"):
        layout = spec["layout"]
        common = dict(
            question_end=int(layout["question_end"]),
            sentences=tuple((int(a), int(b)) for a, b in layout["sentences"]),
            spans=tuple((int(a), int(b)) for a, b in layout["spans"]),
            mask_token=spec.get("mask_token", DEFAULT_MASK),
        )
        if kind == "overlap_qa":
            return OverlapQaModel(**common)
        return DistractorQaModel(
            **common,
            entity_weight=float(spec.get("entity_weight", 2.0)),
            common_weight=float(spec.get("common_weight", 1.0)),
            base_score=float(spec.get("base_score", 0.5)),
            hedge_token=spec.get("hedge_token", "reportedly"),
            hedge_weight=float(spec.get("hedge_weight", 1.0)),
        )
    if kind == "plugin":
        module_name, _, attr = spec["callable"].rpartition(":")
        fn = getattr(importlib.import_module(module_name), attr)
        return PluginModel(fn=fn, task=spec.get("task", "qa"))
    raise ValueError(f"unknown model type: {kind!r}")
