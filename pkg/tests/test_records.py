import json
import math
import tracemalloc
from pathlib import Path

import pytest

from genuq.errors import (
    DatasetError,
    MalformedJson,
    NormalizationError,
    SchemaViolation,
)
from genuq.records import (
    parse_record,
    serialize_record,
    stream_dataset,
    write_dataset,
)
from genuq.synth import SynthSpec, generate_records

from conftest import make_record, make_sample, make_step

FIXTURES = Path(__file__).parent / "fixtures"


def minimal_line():
    return json.dumps(
        {
            "id": "r1",
            "prompt": "q",
            "output": [
                {
                    "token": "a",
                    "logprob": 0.0,
                    "alternatives": [["a", 0.0]],
                    "tail_logmass": "-inf",
                }
            ],
            "samples": [],
            "quality": {},
            "claims": [],
        }
    )


class TestParse:
    def test_minimal_one_hot_record(self):
        record = parse_record(minimal_line())
        assert len(record.output) == 1
        step = record.output[0]
        assert step.logprob == 0.0
        assert step.tail_logmass == -math.inf
        assert math.exp(sum(s.logprob for s in record.output)) == 1.0

    def test_unnormalized_alternatives_rejected(self):
        # masses sum to 0.9
        obj = json.loads(minimal_line())
        obj["output"][0]["alternatives"] = [["a", math.log(0.6)], ["b", math.log(0.3)]]
        obj["output"][0]["logprob"] = math.log(0.6)
        obj["output"][0]["tail_logmass"] = "-inf"
        with pytest.raises(NormalizationError) as err:
            parse_record(json.dumps(obj))
        assert err.value.position == 0

    def test_malformed_json(self):
        with pytest.raises(MalformedJson):
            parse_record("{not json")

    def test_raw_infinity_token_rejected(self):
        obj = json.loads(minimal_line())
        line = json.dumps(obj).replace('"-inf"', "-Infinity")
        with pytest.raises(MalformedJson):
            parse_record(line)

    def test_missing_field(self):
        obj = json.loads(minimal_line())
        del obj["prompt"]
        with pytest.raises(SchemaViolation):
            parse_record(json.dumps(obj))

    def test_chosen_token_must_be_listed_once(self):
        obj = json.loads(minimal_line())
        obj["output"][0]["alternatives"] = [["b", 0.0]]
        with pytest.raises(SchemaViolation):
            parse_record(json.dumps(obj))

    def test_alternatives_sorted(self):
        obj = json.loads(minimal_line())
        obj["output"][0]["logprob"] = math.log(0.5)
        obj["output"][0]["alternatives"] = [["b", math.log(0.5)], ["a", math.log(0.5)]]
        obj["output"][0]["tail_logmass"] = "-inf"
        parse_record(json.dumps(obj))  # equal logprobs are fine
        obj["output"][0]["alternatives"] = [["b", math.log(0.25)], ["a", math.log(0.5)]]
        obj["output"][0]["tail_logmass"] = math.log(0.25)
        with pytest.raises(SchemaViolation):
            parse_record(json.dumps(obj))

    def test_positive_logprob_rejected(self):
        obj = json.loads(minimal_line())
        obj["output"][0]["logprob"] = 0.5
        with pytest.raises(SchemaViolation):
            parse_record(json.dumps(obj))

    def test_claim_indices_validated(self):
        obj = json.loads(minimal_line())
        obj["claims"] = [{"claim_id": "c", "token_indices": [0, 0], "label": "supported"}]
        with pytest.raises(SchemaViolation):
            parse_record(json.dumps(obj))
        obj["claims"] = [{"claim_id": "c", "token_indices": [5], "label": "supported"}]
        with pytest.raises(SchemaViolation):
            parse_record(json.dumps(obj))

    def test_sample_total_must_match_tokens(self):
        obj = json.loads(minimal_line())
        obj["samples"] = [
            {
                "text": "x y",
                "total_logprob": -1.0,
                "tokens": [
                    {"token": "x", "logprob": -1.0},
                    {"token": "y", "logprob": -1.0},
                ],
            }
        ]
        with pytest.raises(SchemaViolation):
            parse_record(json.dumps(obj))

    def test_quality_range_checked_for_known_metrics(self):
        obj = json.loads(minimal_line())
        obj["quality"] = {"alignscore": 1.5}
        with pytest.raises(SchemaViolation):
            parse_record(json.dumps(obj))


class TestRoundTrip:
    def test_fixture_round_trips(self):
        path = FIXTURES / "basic.jsonl"
        for line in path.read_text().splitlines():
            record = parse_record(line)
            out = serialize_record(record)
            assert parse_record(out) == record
            assert serialize_record(parse_record(out)) == out

    def test_synthetic_records_round_trip(self):
        for record in generate_records(SynthSpec(n_records=25, noise=0.1, seed=3)):
            line = serialize_record(record)
            assert parse_record(line) == record
            assert serialize_record(parse_record(line)) == line

    def test_neg_inf_tail_serialized_as_string(self):
        record = parse_record(minimal_line())
        assert '"-inf"' in serialize_record(record)


class TestStream:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert list(stream_dataset(path)) == []

    def test_error_tagged_with_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(minimal_line() + "\n{broken\n")
        it = stream_dataset(path)
        first = next(it)
        assert first.id == "r1"
        with pytest.raises(DatasetError) as err:
            next(it)
        assert err.value.line_number == 2

    def test_streaming_memory_is_flat(self, tmp_path):
        line = minimal_line() + "\n"

        def consume(path):
            tracemalloc.start()
            count = sum(1 for _ in stream_dataset(path))
            _, peak = tracemalloc.get_traced_memory()
            tracemalloc.stop()
            return count, peak

        small = tmp_path / "small.jsonl"
        small.write_text(line * 1000)
        large = tmp_path / "large.jsonl"
        large.write_text(line * 10000)
        n_small, peak_small = consume(small)
        n_large, peak_large = consume(large)
        assert (n_small, n_large) == (1000, 10000)
        # 10x the data should not grow the live set; allow generous slack.
        assert peak_large < 2 * peak_small + 256 * 1024

    def test_write_then_stream(self, tmp_path):
        records = [
            make_record(
                [make_step("a", math.log(0.5), {"b": 0.25})],
                record_id=f"r{i}",
                samples=[make_sample("a b", token_logprobs=[-0.5, -0.25])],
            )
            for i in range(3)
        ]
        path = tmp_path / "data.jsonl"
        write_dataset(records, path)
        assert list(stream_dataset(path)) == records
