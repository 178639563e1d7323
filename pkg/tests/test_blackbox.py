import math

import httpx
import pytest

from xcalib.blackbox import (
    DistractorQaPredictor,
    LinearBagPredictor,
    MalformedRequestError,
    OverlapQaPredictor,
    PredictRequest,
    QaLayout,
    TargetSpec,
    TransportError,
    build_predictor,
)
from xcalib.client import RemotePredictor
from xcalib.types import Task

LAYOUT = QaLayout(question_end=3, sentences=((3, 7), (7, 11)), spans=((4, 5), (8, 9)))


def label_request(sequences, label="entailment"):
    return PredictRequest(
        sequences=tuple(tuple(s) for s in sequences),
        task=Task.NLI,
        target=TargetSpec(kind="label", label=label),
    )


def span_request(sequences, span):
    return PredictRequest(
        sequences=tuple(tuple(s) for s in sequences),
        task=Task.QA,
        target=TargetSpec(kind="span", span=span),
    )


class TestLinearBag:
    def test_zero_weights_constant_sigmoid_bias(self):
        p = LinearBagPredictor(weights={}, bias=0.4)
        resp = p.predict(label_request([["a", "b"], ["c"]]))
        expected = 1 / (1 + math.exp(-0.4))
        assert resp.scores == (pytest.approx(expected), pytest.approx(expected))

    def test_masked_tokens_ignored(self):
        p = LinearBagPredictor(weights={"cat": 2.0}, bias=0.0)
        with_cat = p.predict(label_request([["cat"]])).scores[0]
        masked = p.predict(label_request([["<mask>"]])).scores[0]
        assert with_cat > masked
        assert masked == pytest.approx(0.5)

    def test_batch_equals_per_item(self):
        p = LinearBagPredictor(weights={"x": 0.5, "y": -0.2}, bias=0.1)
        seqs = [["x", "y"], ["x", "<mask>"], ["<mask>", "y"]]
        batched = p.predict(label_request(seqs)).scores
        singles = tuple(p.predict(label_request([s])).scores[0] for s in seqs)
        assert batched == singles

    def test_distribution_sums_to_one(self):
        p = LinearBagPredictor(weights={"x": 1.0}, bias=0.0)
        dist = p.distribution(("x",))
        assert sum(dist.values()) == pytest.approx(1.0)


class TestOverlapQa:
    def test_picks_highest_overlap_sentence(self):
        p = OverlapQaPredictor(layout=LAYOUT)
        seq = ("who", "won", "it", "who", "A", "x", ".", "nothing", "B", "y", ".")
        resp = p.predict(span_request([seq], span=(4, 5)))
        cands = resp.candidates[0]
        assert cands[0][0] == (4, 5)
        assert resp.scores[0] == pytest.approx(1 / 3)

    def test_fully_masked_question_uniform_fallback(self):
        p = OverlapQaPredictor(layout=LAYOUT)
        seq = ("<mask>", "<mask>", "<mask>", "who", "A", "x", ".", "z", "B", "y", ".")
        resp = p.predict(span_request([seq], span=(4, 5)))
        assert resp.scores[0] == pytest.approx(0.5)


class TestDistractorQa:
    def _instance_tokens(self):
        # question: which Kor Tol ; gold sentence mentions both entities;
        # distractor echoes the common word "which".
        return ("which", "Kor", "Tol", "Kor", "A", "Tol", ".", "which", "B", "x", ".")

    def test_entities_present_returns_gold_span(self):
        p = DistractorQaPredictor(layout=LAYOUT)
        resp = p.predict(span_request([self._instance_tokens()], span=(4, 5)))
        assert resp.candidates[0][0][0] == (4, 5)

    def test_entities_masked_returns_distractor_span(self):
        p = DistractorQaPredictor(layout=LAYOUT)
        seq = list(self._instance_tokens())
        seq[1] = seq[2] = "<mask>"  # mask the question's proper nouns
        resp = p.predict(span_request([seq], span=(4, 5)))
        assert resp.candidates[0][0][0] == (8, 9)

    def test_determinism(self):
        p = DistractorQaPredictor(layout=LAYOUT)
        a = p.predict(span_request([self._instance_tokens()], span=(4, 5)))
        b = p.predict(span_request([self._instance_tokens()], span=(4, 5)))
        assert a == b


def test_request_validation():
    p = LinearBagPredictor()
    with pytest.raises(MalformedRequestError):
        p.predict(label_request([]))
    with pytest.raises(MalformedRequestError):
        p.predict(label_request([[]]))


def test_build_predictor_roundtrip():
    spec = {"type": "overlap_qa", "layout": LAYOUT.to_json()}
    p = build_predictor(spec)
    assert isinstance(p, OverlapQaPredictor)
    assert p.layout == LAYOUT
    with pytest.raises(ValueError):
        build_predictor({"type": "nope"})


class TestRemoteClient:
    def _predictor_with_transport(self, handler, **kwargs):
        predictor = RemotePredictor(base_url="http://server", backoff=0.0, **kwargs)
        predictor._client = httpx.Client(
            base_url="http://server", transport=httpx.MockTransport(handler)
        )
        return predictor

    def test_scores_and_order_preserved(self):
        def handler(request):
            body = request.read().decode()
            import json

            payload = json.loads(body)
            scores = [float(len([t for t in seq if t != "<mask>"])) / 10 for seq in payload["sequences"]]
            return httpx.Response(200, json={"scores": scores, "candidates": None})

        predictor = self._predictor_with_transport(handler, batch_size=2)
        seqs = [["a", "b"], ["a", "<mask>"], ["<mask>", "<mask>"], ["x", "y"]]
        resp = predictor.predict(span_request(seqs, span=(0, 1)))
        assert resp.scores == (0.2, 0.1, 0.0, 0.2)

    def test_retry_then_success(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            if calls["n"] < 3:
                return httpx.Response(503, text="busy")
            return httpx.Response(200, json={"scores": [0.5]})

        predictor = self._predictor_with_transport(handler, retries=3)
        resp = predictor.predict(span_request([["a"]], span=(0, 1)))
        assert resp.scores == (0.5,)
        assert calls["n"] == 3

    def test_transport_error_after_retries(self):
        def handler(request):
            return httpx.Response(500, text="down")

        predictor = self._predictor_with_transport(handler, retries=1)
        with pytest.raises(TransportError) as err:
            predictor.predict(span_request([["a"]], span=(0, 1)))
        assert err.value.succeeded == 0

    def test_client_error_is_fatal_not_retried(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(400, json={"error": "bad"})

        predictor = self._predictor_with_transport(handler, retries=5)
        with pytest.raises(MalformedRequestError):
            predictor.predict(span_request([["a"]], span=(0, 1)))
        assert calls["n"] == 1

    def test_partial_success_counted(self):
        def handler(request):
            import json

            payload = json.loads(request.read().decode())
            if payload["sequences"][0][0] == "fail":
                return httpx.Response(500, text="boom")
            return httpx.Response(200, json={"scores": [0.1] * len(payload["sequences"])})

        predictor = self._predictor_with_transport(handler, retries=0, batch_size=2, max_in_flight=1)
        seqs = [["ok", "x"], ["ok", "y"], ["fail", "z"], ["ok", "w"]]
        with pytest.raises(TransportError) as err:
            predictor.predict(span_request(seqs, span=(0, 1)))
        assert err.value.succeeded == 2  # the first two-sequence batch completed
