"""Calibration feature vectors: probability baselines, bag-of-property counts,
and per-property attribution aggregates."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .properties import PropertyScheme, TokenProperties, annotate, property_space
from .types import AnnotatedInstance, Attribution, ExplainerKind, Segment, Task

N_TOP_PROBS = 5
LABEL_ENTAILMENT = "entailment"
LABEL_CONTRADICTION = "contradiction"


class Family(str, Enum):
    MAX_PROB = "max_prob"
    KAMATH = "kamath"
    CLS_PROB = "cls_prob"
    BOW_PROP = "bow_prop"
    LIME_CAL = "lime_cal"
    SHAP_CAL = "shap_cal"


ATTRIBUTION_FAMILIES = {Family.LIME_CAL: ExplainerKind.LIME, Family.SHAP_CAL: ExplainerKind.SHAP}


class BowMode(str, Enum):
    COUNT = "count"
    BINARY = "binary"
    FRACTION = "fraction"


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray
    family: Family

    def __post_init__(self) -> None:
        if len(self.names) != len(self.values):
            raise ValueError("names and values lengths differ")
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")

    def __len__(self) -> int:
        return len(self.names)

    def value_of(self, name: str) -> float:
        return float(self.values[self.names.index(name)])


def aggregate_attributions(
    attr: Attribution, props: TokenProperties, space: list[str]
) -> dict[str, float]:
    """Sum attribution values over the tokens carrying each property;
    properties carried by no token aggregate to 0."""
    if len(attr) != len(props):
        raise ValueError(f"attribution length {len(attr)} != token count {len(props)}")
    totals = dict.fromkeys(space, 0.0)
    for phi, token_props in zip(attr.phis, props.per_token):
        for p in token_props:
            if p in totals:
                totals[p] += phi
    return totals


def kamath_features(instance: AnnotatedInstance) -> dict[str, float]:
    """QA baseline features: top-5 probabilities (zero-padded), context token
    count, predicted answer token count."""
    if instance.task != Task.QA:
        raise ValueError("kamath features are QA-only")
    probs = [p for _, p in instance.prediction.top_probs[:N_TOP_PROBS]]
    probs += [0.0] * (N_TOP_PROBS - len(probs))
    out = {f"top_prob_{i + 1}": probs[i] for i in range(N_TOP_PROBS)}
    out["context_length"] = float(
        len(instance.segment_indices(Segment.CONTEXT, Segment.ANSWER))
    )
    start, end = instance.prediction.span
    out["answer_length"] = float(end - start)
    return out


def clsprob_features(instance: AnnotatedInstance) -> dict[str, float]:
    """NLI baseline features: P(entailment) and P(contradiction); neutral is
    implied by the other two."""
    if instance.task != Task.NLI:
        raise ValueError("clsprob features are NLI-only")
    p_ent = instance.prediction.probability_of(LABEL_ENTAILMENT)
    p_con = instance.prediction.probability_of(LABEL_CONTRADICTION)
    if p_ent is None or p_con is None:
        raise ValueError("full class distribution (entailment/contradiction) missing")
    return {"p_entailment": p_ent, "p_contradiction": p_con}


def bow_property_features(
    props: TokenProperties, space: list[str], mode: BowMode = BowMode.COUNT
) -> dict[str, float]:
    """Per-property carrier statistics: token counts by default, optionally
    binary indicators or fractions of the token count."""
    counts = dict.fromkeys(space, 0.0)
    for token_props in props.per_token:
        for p in token_props:
            if p in counts:
                counts[p] += 1.0
    if mode == BowMode.BINARY:
        return {k: (1.0 if v > 0 else 0.0) for k, v in counts.items()}
    if mode == BowMode.FRACTION:
        n = max(len(props), 1)
        return {k: v / n for k, v in counts.items()}
    return counts


def base_features(instance: AnnotatedInstance) -> dict[str, float]:
    return kamath_features(instance) if instance.task == Task.QA else clsprob_features(instance)


def assemble(
    instance: AnnotatedInstance,
    scheme: PropertyScheme,
    family: Family,
    attribution: Attribution | None = None,
    props: TokenProperties | None = None,
    bow_mode: BowMode = BowMode.COUNT,
) -> FeatureVector:
    """Concatenate, in fixed order, the base features, the bag-of-property
    counts, and (for attribution families) the attribution aggregates.

    ``props`` may be passed in when the caller has already annotated the
    instance; otherwise annotation runs here.
    """
    if family == Family.MAX_PROB:
        raise ValueError("max_prob is a scorer, not a feature family")
    wants_attr = family in ATTRIBUTION_FAMILIES
    if wants_attr and attribution is None:
        raise ValueError(f"family {family.value} requires an attribution")
    if not wants_attr and attribution is not None:
        raise ValueError(f"family {family.value} does not take an attribution")
    if wants_attr and attribution.explainer != ATTRIBUTION_FAMILIES[family]:
        raise ValueError(
            f"family {family.value} expects {ATTRIBUTION_FAMILIES[family].value} "
            f"attributions, got {attribution.explainer.value}"
        )

    names: list[str] = []
    values: list[float] = []

    if family == Family.KAMATH:
        base = kamath_features(instance)
    elif family == Family.CLS_PROB:
        base = clsprob_features(instance)
    else:
        base = base_features(instance)
    names.extend(base.keys())
    values.extend(base.values())

    if family in (Family.BOW_PROP, Family.LIME_CAL, Family.SHAP_CAL):
        space = property_space(scheme)
        props = props if props is not None else annotate(instance, scheme)
        bow = bow_property_features(props, space, mode=bow_mode)
        names.extend(f"bow:{p}" for p in space)
        values.extend(bow[p] for p in space)
        if wants_attr:
            agg = aggregate_attributions(attribution, props, space)
            names.extend(f"attr:{p}" for p in space)
            values.extend(agg[p] for p in space)

    return FeatureVector(names=tuple(names), values=np.array(values, dtype=float), family=family)
