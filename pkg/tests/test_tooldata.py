"""Tests for tool-call parsing, value comparison and dialogue decomposition."""

import json
from decimal import Decimal
from pathlib import Path

import numpy as np
import pytest

from restkit.data.constants import ResponseTemplate
from restkit.data.exceptions import DataError, MalformedBody
from restkit.tooldata.Dialogue import (
    Dialogue,
    Message,
    Sample,
    Turn,
    decompose_dialogue,
    dump_samples,
    load_dialogues,
    load_predictions,
    load_responses,
    load_samples,
)
from restkit.tooldata.ToolCall import (
    ToolCall,
    ToolCallSet,
    canonicalize_value,
    parse_tool_calls,
    parse_tool_calls_lenient,
    serialize_tool_calls,
    values_equal,
)

from .helpers import data_path


def test_parse_single_call() -> None:
    raw = (
        "<think>weather</think><tool_call>"
        '{"name":"get_weather","arguments":{"city":"Paris"}}</tool_call>'
    )
    calls = parse_tool_calls(raw)
    assert len(calls) == 1
    assert calls[0].name == "get_weather"
    assert calls[0].params == {"city": "Paris"}


def test_parse_without_delimiters_is_empty() -> None:
    assert len(parse_tool_calls('{"name": "f", "arguments": {}}')) == 0
    assert len(parse_tool_calls("")) == 0


def test_parse_two_calls_in_one_block_keeps_order() -> None:
    raw = (
        '<tool_call>{"name": "b", "arguments": {"k": 1}}\n'
        '{"name": "a", "arguments": {}}</tool_call>'
    )
    expected = ToolCallSet((ToolCall("b", {"k": 1}), ToolCall("a")))
    assert parse_tool_calls(raw) == expected


def test_parse_list_body_and_several_blocks() -> None:
    raw = (
        '<tool_call>[{"name": "a", "arguments": {}}, {"name": "b", "arguments": {}}]</tool_call>'
        ' then <tool_call>{"name": "c", "arguments": {}}</tool_call>'
    )
    assert [call.name for call in parse_tool_calls(raw)] == ["a", "b", "c"]


def test_parse_arguments_given_as_string() -> None:
    raw = '<tool_call>{"name": "f", "arguments": "{\\"x\\": 2}"}</tool_call>'
    assert parse_tool_calls(raw)[0].params == {"x": Decimal(2)}


def test_unmatched_open_delimiter_encloses_nothing() -> None:
    assert len(parse_tool_calls('<tool_call>{"name": "f", "arguments": {}}')) == 0


@pytest.mark.parametrize(
    "body",
    [
        '{"name": "f", "arguments": {"x": 1}',
        '{"arguments": {}}',
        '{"name": 3}',
        '"just a string"',
        '{"name": "f", "arguments": [1, 2]}',
    ],
)
def test_malformed_bodies(body: str) -> None:
    raw = f"<tool_call>{body}</tool_call>"
    with pytest.raises(MalformedBody):
        parse_tool_calls(raw)
    calls, error = parse_tool_calls_lenient(raw)
    assert len(calls) == 0
    assert error is not None


def test_custom_template() -> None:
    template = ResponseTemplate("[T]", "[/T]", "[C]", "[/C]")
    raw = '[T]hmm[/T][C]{"name": "f", "arguments": {}}[/C]'
    assert parse_tool_calls(raw, template).names == frozenset({"f"})
    assert len(parse_tool_calls(raw)) == 0


def test_value_equality_rules() -> None:
    assert values_equal(1.0, 1)
    assert values_equal(Decimal("2.50"), 2.5)
    assert not values_equal("Paris", "paris")
    assert values_equal({"a": 1, "b": 2}, {"b": 2, "a": 1})
    assert not values_equal(True, 1)
    assert not values_equal(None, 0)
    assert values_equal([1, {"x": 0.0}], [1.0, {"x": 0}])
    assert not values_equal([1, 2], [2, 1])


def test_canonicalize_normalizes_numbers() -> None:
    assert canonicalize_value(10) == Decimal("1E+1")
    assert canonicalize_value(-0.0) == Decimal(0)
    assert canonicalize_value({"b": 1, "a": "x"}) == {"a": "x", "b": Decimal(1)}
    with pytest.raises(TypeError):
        canonicalize_value(object())


def test_serialize_parse_round_trip() -> None:
    calls = ToolCallSet(
        (
            ToolCall("get_weather", {"city": "Zürich", "days": 3}),
            ToolCall("noop"),
            ToolCall("nested", {"opts": {"flag": True, "ratio": 0.25, "tags": ["a", None]}}),
        )
    )
    assert parse_tool_calls(serialize_tool_calls(calls)) == calls


def test_tool_call_records() -> None:
    calls = ToolCallSet.from_records([{"name": "f", "arguments": {"x": 1, "y": 0.5}}])
    assert calls.to_records() == [{"name": "f", "arguments": {"x": 1, "y": 0.5}}]
    assert calls.by_name()["f"].param_names == frozenset({"x", "y"})


def _message(role: str, text: str) -> Message:
    return Message(role, text)


def test_decompose_single_turn() -> None:
    dialogue = Dialogue("d", (Turn((_message("user", "hi"),), "hello"),))
    samples = decompose_dialogue(dialogue)
    assert len(samples) == 1
    assert samples[0].context == (_message("user", "hi"),)
    assert samples[0].target_response == "hello"


def test_decompose_dialogue_file() -> None:
    dialogues = load_dialogues(data_path("dialogues.jsonl"))
    samples = decompose_dialogue(dialogues[0])
    assert [s.id for s in samples] == ["d1/1", "d1/2", "d1/3"]
    third = samples[2]
    history = [m.content for m in third.context if m.role == "assistant"]
    assert history == [samples[0].target_response, samples[1].target_response]
    assert third.context[-1].role == "tool"
    assert third.gold_calls.names == frozenset({"book"})


def test_decompose_reconstructs_actions() -> None:
    rng = np.random.default_rng(5)
    for k in range(20):
        n_turns = int(rng.integers(1, 6))
        turns = tuple(
            Turn(
                (_message(str(rng.choice(["user", "tool"])), f"obs {k}.{t}"),),
                f"action {k}.{t}",
            )
            for t in range(n_turns)
        )
        dialogue = Dialogue(f"r{k}", turns)
        samples = decompose_dialogue(dialogue)
        assert len(samples) == len(dialogue)
        assert [s.target_response for s in samples] == [t.action for t in turns]
        for earlier, later in zip(samples, samples[1:]):
            assert later.context[: len(earlier.context)] == earlier.context


def test_sample_records_round_trip() -> None:
    samples = load_samples(data_path("gold.jsonl"))
    text = dump_samples(samples)
    assert [Sample.from_record(json.loads(line)) for line in text.splitlines()] == samples


def test_context_validation() -> None:
    with pytest.raises(DataError):
        Message("system", "x")
    with pytest.raises(DataError):
        Sample("s", (), "")
    with pytest.raises(DataError):
        Sample("s", (_message("user", "q"), _message("assistant", "a")), "")
    with pytest.raises(DataError):
        Dialogue("d", ())


def test_load_errors(tmp_path: Path) -> None:
    empty = tmp_path / "empty.jsonl"
    empty.write_text("\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_samples(empty)

    broken = tmp_path / "broken.jsonl"
    broken.write_text('{"id": "x"\n', encoding="utf-8")
    with pytest.raises(DataError):
        load_predictions(broken)

    missing = tmp_path / "missing.jsonl"
    missing.write_text('{"id": "x", "target": ""}\n', encoding="utf-8")
    with pytest.raises(DataError):
        load_samples(missing)


def test_load_predictions() -> None:
    predictions = load_predictions(data_path("predictions.jsonl"))
    assert sorted(predictions) == ["s1", "s2", "s3"]


@pytest.mark.parametrize("line", ['["not", "an", "object"]', "3", '"text"', "null"])
def test_non_object_records_are_data_errors(tmp_path: Path, line: str) -> None:
    path = tmp_path / "records.jsonl"
    path.write_text(line + "\n", encoding="utf-8")
    for loader in (load_predictions, load_samples, load_dialogues):
        with pytest.raises(DataError):
            loader(path)


def test_load_responses_reads_raw_lines(tmp_path: Path) -> None:
    path = tmp_path / "raw.txt"
    path.write_text(
        '<think>x</think><tool_call>{"name": "f", "arguments": {}}</tool_call>\n'
        "\n"
        '{"id": "a", "response": "first"}\n'
        '{"id": "a", "response": "second"}\n'
        "plain text\n",
        encoding="utf-8",
    )
    assert load_responses(path) == [
        (1, '<think>x</think><tool_call>{"name": "f", "arguments": {}}</tool_call>'),
        (3, "first"),
        (4, "second"),
        (5, "plain text"),
    ]


def test_load_responses_errors(tmp_path: Path) -> None:
    blank = tmp_path / "blank.txt"
    blank.write_text("\n  \n", encoding="utf-8")
    with pytest.raises(DataError):
        load_responses(blank)
    no_response = tmp_path / "no_response.jsonl"
    no_response.write_text('{"id": "a"}\n', encoding="utf-8")
    with pytest.raises(DataError):
        load_responses(no_response)
