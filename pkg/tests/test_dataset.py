import json

import pytest

from xcalib.dataset import (
    IngestError, ingest, instance_to_record, qa_correctness, record_to_instance,
    validate_file, write_instances,
)
from xcalib.types import Segment


def qa_record(span=(3, 4), gold=("paris",), probs=((("1", 0.8)), (("2", 0.1)))):
    return {
        "id": "r1",
        "task": "qa",
        "tokens": [
            {"text": "where", "tag": "WRB", "segment": "question"},
            {"text": "is", "tag": "VBZ", "segment": "question"},
            {"text": "in", "tag": "IN", "segment": "context"},
            {"text": "Paris", "tag": "NNP", "segment": "context"},
            {"text": "today", "tag": "RB", "segment": "context"},
        ],
        "gold": list(gold),
        "prediction": {"span": list(span), "top_probs": [["1", 0.8], ["2", 0.1]]},
    }


def nli_record(label="entailment", gold="entailment"):
    return {
        "id": "r2",
        "task": "nli",
        "tokens": [
            {"text": "a", "tag": "DT", "segment": "premise"},
            {"text": "cat", "tag": "NN", "segment": "premise"},
            {"text": "the", "tag": "DT", "segment": "hypothesis"},
            {"text": "cat", "tag": "NN", "segment": "hypothesis"},
        ],
        "gold": gold,
        "prediction": {
            "label": label,
            "top_probs": [["entailment", 0.7], ["contradiction", 0.2], ["neutral", 0.1]],
        },
    }


class TestCorrectness:
    def test_exact_match_gives_full_quality(self):
        inst = record_to_instance(qa_record())
        assert inst.correct is True
        assert inst.quality == 1.0

    def test_partial_overlap_quality(self):
        correct, quality = qa_correctness("the cat", ["cat"])
        assert correct is False
        assert quality == pytest.approx(2 / 3)

    def test_any_gold_reference_matches(self):
        correct, quality = qa_correctness("paris", ["lyon", "Paris"])
        assert correct is True
        assert quality == 1.0

    def test_nli_label_equality(self):
        assert record_to_instance(nli_record()).correct is True
        wrong = record_to_instance(nli_record(label="contradiction"))
        assert wrong.correct is False
        assert wrong.quality == 0.0


class TestAnswerSegment:
    def test_predicted_span_becomes_answer_segment(self):
        inst = record_to_instance(qa_record())
        assert inst.tokens[3].segment == Segment.ANSWER
        assert inst.tokens[2].segment == Segment.CONTEXT

    def test_reassignment_is_idempotent_roundtrip(self):
        inst = record_to_instance(qa_record())
        rec = instance_to_record(inst)
        assert rec["tokens"][3]["segment"] == "answer"
        again = record_to_instance(rec)
        assert again == inst
        assert instance_to_record(again) == rec


class TestIngest:
    def test_file_roundtrip(self, tmp_path):
        path = tmp_path / "data.jsonl"
        with open(path, "w") as fh:
            fh.write(json.dumps(qa_record()) + "\n")
            fh.write(json.dumps(nli_record()) + "\n")
        instances = ingest(path)
        assert [i.id for i in instances] == ["r1", "r2"]
        out = tmp_path / "copy.jsonl"
        write_instances(instances, out)
        assert ingest(out) == instances

    def test_missing_tokens_field_reports_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        rec = qa_record()
        del rec["tokens"]
        with open(path, "w") as fh:
            fh.write(json.dumps(qa_record()) + "\n")
            fh.write(json.dumps(rec) + "\n")
        with pytest.raises(IngestError) as err:
            ingest(path)
        assert err.value.line_no == 2
        assert err.value.field == "tokens"

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("{not json}\n")
        with pytest.raises(IngestError, match="line 1"):
            ingest(path)

    def test_validation_violation_raises(self, tmp_path):
        rec = nli_record()
        rec["prediction"]["top_probs"] = [["entailment", 0.7], ["contradiction", 0.7], ["neutral", 0.1]]
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(rec) + "\n")
        with pytest.raises(IngestError, match="sum"):
            ingest(path)


class TestValidateFile:
    def test_collects_all_problems(self, tmp_path):
        bad_probs = nli_record()
        bad_probs["prediction"]["top_probs"] = [["entailment", 0.9], ["contradiction", 0.9], ["neutral", 0.1]]
        missing = qa_record()
        del missing["gold"]
        path = tmp_path / "mixed.jsonl"
        with open(path, "w") as fh:
            fh.write(json.dumps(qa_record()) + "\n")
            fh.write(json.dumps(bad_probs) + "\n")
            fh.write("oops\n")
            fh.write(json.dumps(missing) + "\n")
        problems = validate_file(path)
        assert [p["line"] for p in problems] == [2, 3, 4]

    def test_clean_file_is_empty(self, tmp_path):
        path = tmp_path / "ok.jsonl"
        path.write_text(json.dumps(qa_record()) + "\n")
        assert validate_file(path) == []
