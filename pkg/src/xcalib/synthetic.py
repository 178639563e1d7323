"""Synthetic corpora with controllable base-model behavior.

The QA corpus pairs a fixed 34-token layout (question, evidence sentence,
distractor sentence) with the distractor-sensitive predictor: the evidence
sentence always shares the question's two proper nouns plus its topic noun,
while the distractor shares ``k`` common words drawn per instance.  The
recorded prediction is the predictor's own argmax on the full input, so an
instance is correct exactly when the proper-noun overlap outweighs the
common-word overlap, and masking those proper nouns is what flips the
prediction.  Tag counts per segment are identical across instances by
construction; only attribution values separate correct from incorrect.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .blackbox import DistractorQaPredictor, LinearBagPredictor, QaLayout
from .dataset import record_to_instance, write_instances
from .types import AnnotatedInstance, Task
from .util import derive_seed

QUESTION_END = 8
GOLD_SENTENCE = (8, 21)
DISTRACTOR_SENTENCE = (21, 34)
GOLD_SPAN = (14, 16)
DISTRACTOR_SPAN = (27, 29)

QA_LAYOUT = QaLayout(
    question_end=QUESTION_END,
    sentences=(GOLD_SENTENCE, DISTRACTOR_SENTENCE),
    spans=(GOLD_SPAN, DISTRACTOR_SPAN),
)

HEDGE_TOKEN = "reportedly"
PLAIN_ADVERB = "today"

WH_WORDS = [("which", "WDT"), ("what", "WP"), ("who", "WP"), ("whose", "WP$")]
NOUNS = ["city", "river", "team", "festival", "treaty", "bridge", "garrison", "museum"]
VERBS = [
    ("visit", "visited"), ("found", "founded"), ("survey", "surveyed"),
    ("charter", "chartered"), ("restore", "restored"), ("occupy", "occupied"),
]
ADVERBS = ["recently", "finally", "quietly", "formally", "initially", "briefly"]

_SYLLABLES = ["bar", "den", "kor", "lim", "mar", "nov", "pel", "ras", "tol", "vun", "wex", "zar"]


def _name(rng: np.random.Generator) -> str:
    parts = rng.choice(len(_SYLLABLES), size=rng.integers(2, 4))
    word = "".join(_SYLLABLES[i] for i in parts)
    return word.capitalize()


def qa_predictor_spec() -> dict:
    return {
        "type": "distractor_qa",
        "layout": QA_LAYOUT.to_json(),
        "hedge_token": HEDGE_TOKEN,
    }


def _qa_instance_record(index: int, seed: int, predictor: DistractorQaPredictor) -> dict:
    rng = np.random.default_rng(derive_seed(seed, "qa", index))

    wh, wh_tag = WH_WORDS[rng.integers(len(WH_WORDS))]
    noun = NOUNS[rng.integers(len(NOUNS))]
    verb, verb_past = VERBS[rng.integers(len(VERBS))]
    adverb = ADVERBS[rng.integers(len(ADVERBS))]
    e1, e2 = _name(rng), _name(rng)
    d1, d2 = _name(rng), _name(rng)
    answer_name, answer_year = _name(rng), str(1800 + int(rng.integers(0, 200)))
    spurious_name = _name(rng)
    while spurious_name == answer_name:
        spurious_name = _name(rng)
    spurious_year = str(1800 + int(rng.integers(0, 200)))
    if spurious_year == answer_year:
        spurious_year = str(1800 + (int(answer_year) - 1799) % 200)

    alt_wh = next(w for w, _ in WH_WORDS if w != wh)
    alt_noun, alt_noun2 = [n for n in NOUNS if n != noun][:2]
    alt_verb = next(v for v, _ in VERBS if v != verb)
    alt_adverb, alt_adverb2 = [a for a in ADVERBS if a != adverb][:2]

    # Boost slots in the distractor sentence: (position, matching word, plain
    # word, raw tag).  Matching words echo the question; plain words carry the
    # same tag so per-segment tag counts never vary.
    boost_slots = [
        (23, verb, alt_verb, "VB"),
        (24, wh, alt_wh, wh_tag),
        (25, "did", "was", "VBD"),
        (26, noun, alt_noun, "NN"),
        (29, adverb, alt_adverb, "RB"),
        (30, noun, alt_noun2, "NN"),
        (31, adverb, alt_adverb2, "RB"),
    ]
    k = int(rng.integers(1, len(boost_slots) + 1))
    matched = set(rng.choice(len(boost_slots), size=k, replace=False).tolist())
    hedges = rng.random(3) < 0.5

    texts_tags: list[tuple[str, str]] = [("", "")] * 34
    texts_tags[0] = (wh, wh_tag)
    texts_tags[1] = (noun, "NN")
    texts_tags[2] = ("did", "VBD")
    texts_tags[3] = (e1, "NNP")
    texts_tags[4] = (e2, "NNP")
    texts_tags[5] = (verb, "VB")
    texts_tags[6] = (adverb, "RB")
    texts_tags[7] = ("?", ".")

    texts_tags[8] = (e1, "NNP")
    texts_tags[9] = (e2, "NNP")
    texts_tags[10] = (verb_past, "VBD")
    texts_tags[11] = ("the", "DT")
    texts_tags[12] = (noun, "NN")
    texts_tags[13] = ("of", "IN")
    texts_tags[14] = (answer_name, "NNP")
    texts_tags[15] = (answer_year, "CD")
    texts_tags[16] = ("in", "IN")
    texts_tags[17] = ("the", "DT")
    texts_tags[18] = (HEDGE_TOKEN if hedges[0] else PLAIN_ADVERB, "RB")
    texts_tags[19] = (HEDGE_TOKEN if hedges[1] else PLAIN_ADVERB, "RB")
    texts_tags[20] = (".", ".")

    texts_tags[21] = (d1, "NNP")
    texts_tags[22] = (d2, "NNP")
    for slot_idx, (pos, match_word, plain_word, tag) in enumerate(boost_slots):
        texts_tags[pos] = (match_word if slot_idx in matched else plain_word, tag)
    texts_tags[27] = (spurious_name, "NNP")
    texts_tags[28] = (spurious_year, "CD")
    texts_tags[32] = (HEDGE_TOKEN if hedges[2] else PLAIN_ADVERB, "RB")
    texts_tags[33] = (".", ".")

    sequence = tuple(text for text, _ in texts_tags)
    probs = predictor.span_probs(sequence)
    predicted_idx = int(np.argmax(probs))
    span = QA_LAYOUT.spans[predicted_idx]
    other_idx = 1 - predicted_idx

    tokens = [
        {"text": text, "tag": tag, "segment": "question" if i < QUESTION_END else "context"}
        for i, (text, tag) in enumerate(texts_tags)
    ]
    return {
        "id": f"qa-{seed}-{index}",
        "task": "qa",
        "tokens": tokens,
        "gold": [f"{answer_name} {answer_year}"],
        "prediction": {
            "span": list(span),
            "top_probs": [["1", probs[predicted_idx]], ["2", probs[other_idx]]],
        },
    }


def generate_qa_corpus(size: int, seed: int = 0) -> list[AnnotatedInstance]:
    predictor = DistractorQaPredictor(layout=QA_LAYOUT, hedge_token=HEDGE_TOKEN)
    return [
        record_to_instance(_qa_instance_record(i, seed, predictor), line_no=i + 1)
        for i in range(size)
    ]


NLI_NOUNS = ["dog", "boat", "choir", "engine", "valley", "planet"]
NLI_VERBS = ["hums", "drifts", "rests", "signals", "turns", "waits"]
NLI_MODIFIERS = ["slowly", "openly", "gently", "rarely", "boldly", "evenly"]
NLI_LABELS = ("entailment", "contradiction", "neutral")


def nli_predictor_spec(seed: int = 0) -> dict:
    rng = np.random.default_rng(derive_seed(seed, "nli-weights"))
    vocab = NLI_NOUNS + NLI_VERBS + NLI_MODIFIERS
    weights = {w: round(float(rng.normal(0.0, 0.8)), 4) for w in vocab}
    return {"type": "linear_bag", "weights": weights, "bias": 0.1}


def _nli_instance_record(index: int, seed: int, predictor: LinearBagPredictor) -> dict:
    rng = np.random.default_rng(derive_seed(seed, "nli", index))

    def pick(words: list[str]) -> str:
        return words[rng.integers(len(words))]

    premise = ["the", pick(NLI_NOUNS), pick(NLI_VERBS), pick(NLI_MODIFIERS), "."]
    shared = rng.random() < 0.5
    hyp_noun = premise[1] if shared else pick(NLI_NOUNS)
    hypothesis = ["a", hyp_noun, pick(NLI_VERBS), "."]
    tags = {"the": "DT", "a": "DT", ".": "."}

    def tag_of(word: str) -> str:
        if word in tags:
            return tags[word]
        if word in NLI_NOUNS:
            return "NN"
        if word in NLI_VERBS:
            return "VBZ"
        return "RB"

    tokens = [
        {"text": w, "tag": tag_of(w), "segment": "premise"} for w in premise
    ] + [
        {"text": w, "tag": tag_of(w), "segment": "hypothesis"} for w in hypothesis
    ]
    sequence = tuple(premise + hypothesis)
    dist = predictor.distribution(sequence)
    ranked = sorted(dist.items(), key=lambda kv: (-kv[1], kv[0]))
    predicted = ranked[0][0]
    gold = predicted if rng.random() < 0.7 else next(l for l in NLI_LABELS if l != predicted)
    return {
        "id": f"nli-{seed}-{index}",
        "task": "nli",
        "tokens": tokens,
        "gold": gold,
        "prediction": {"label": predicted, "top_probs": [[lab, p] for lab, p in ranked]},
    }


def generate_nli_corpus(size: int, seed: int = 0) -> list[AnnotatedInstance]:
    from .blackbox import build_predictor

    predictor = build_predictor(nli_predictor_spec(seed))
    return [
        record_to_instance(_nli_instance_record(i, seed, predictor), line_no=i + 1)
        for i in range(size)
    ]


def write_corpus(task: Task, size: int, seed: int, dataset_path: str | Path) -> dict:
    """Generate a corpus plus its companion predictor spec file.

    Returns a summary with paths and the base rate of correct predictions.
    """
    dataset_path = Path(dataset_path)
    if task == Task.QA:
        instances = generate_qa_corpus(size, seed)
        spec = qa_predictor_spec()
    else:
        instances = generate_nli_corpus(size, seed)
        spec = nli_predictor_spec(seed)
    write_instances(instances, dataset_path)
    spec_path = dataset_path.with_suffix(".predictor.json")
    spec_path.write_text(json.dumps(spec, sort_keys=True, indent=2) + "\n")
    return {
        "dataset": str(dataset_path),
        "predictor_spec": str(spec_path),
        "size": len(instances),
        "base_rate": sum(i.correct for i in instances) / len(instances),
    }
