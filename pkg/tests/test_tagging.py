"""Tests for byte tokenization, region tagging and region entropy statistics."""

from typing import Any

import numpy as np
import pytest

from restkit.data.constants import RegionTag, ResponseTemplate
from restkit.data.exceptions import LengthMismatch
from restkit.tagging.RegionTagger import (
    TaggedResponse,
    detokenize,
    pooled_region_entropy,
    region_entropy_stats,
    tag_regions,
    tokenize,
)

from .helpers import DataHelper

FIXTURES = DataHelper("tagging_fixtures")


def _tagged(*spans: RegionTag) -> TaggedResponse:
    return TaggedResponse(
        tokens=tuple(range(len(spans))),
        spans=spans,
        char_map=tuple((i, i + 1) for i in range(len(spans))),
    )


def test_tokenize_counts() -> None:
    assert len(tokenize("ab")[0]) == 2
    assert tokenize("") == ([], [])
    tokens, char_map = tokenize("é")
    assert len(tokens) == 2
    assert char_map == [(0, 1), (1, 2)]


def test_detokenize_round_trip() -> None:
    alphabet = list("abc {}\"':,<>/\n") + ["é", "日", "ß", "🙂"]
    rng = np.random.default_rng(17)
    for _ in range(200):
        text = "".join(rng.choice(alphabet, size=int(rng.integers(0, 40))))
        assert detokenize(tokenize(text)[0]) == text


def test_compact_call_regions() -> None:
    tagged = tag_regions('<think>x</think><tool_call>{"name":"f","arguments":{"a":1}}</tool_call>')
    assert len(tagged) == 71
    assert tagged.text_of(RegionTag.THOUGHT) == "x"
    assert tagged.text_of(RegionTag.TOOL_NAME) == "f"
    assert tagged.text_of(RegionTag.PARAMETER) == "a1"
    assert tagged.text_of(RegionTag.FORMAT).startswith("<think></think><tool_call>{")
    assert tagged.counts()[RegionTag.OTHER] == 0


@pytest.mark.parametrize(
    "raw,n_format,n_other",
    [
        ("<think>abc", 7, 3),
        ('<tool_call>{"name":"f"', 11, 11),
        ("abc</think>", 8, 3),
        ("x</tool_call>", 12, 1),
    ],
)
def test_unmatched_delimiters(raw: str, n_format: int, n_other: int) -> None:
    counts = tag_regions(raw).counts()
    assert counts[RegionTag.FORMAT] == n_format
    assert counts[RegionTag.OTHER] == n_other
    assert counts[RegionTag.THOUGHT] == 0
    assert counts[RegionTag.TOOL_NAME] == 0


def test_plain_text_is_other() -> None:
    tagged = tag_regions("no markup here")
    assert set(tagged.spans) == {RegionTag.OTHER}


@pytest.mark.parametrize("fixture", FIXTURES.records, ids=FIXTURES.ids())
def test_hand_annotated_counts(fixture: dict[str, Any]) -> None:
    tagged = tag_regions(fixture["response"])
    counts = {tag.value: n for tag, n in tagged.counts().items()}
    assert counts == fixture["counts"]
    assert sum(counts.values()) == len(fixture["response"].encode("utf-8"))
    assert tagged.text_of(RegionTag.TOOL_NAME) == fixture["name_text"]


def test_unlexable_body_is_other() -> None:
    tagged = tag_regions("<tool_call>{oops}</tool_call>")
    assert tagged.counts()[RegionTag.FORMAT] == len("<tool_call></tool_call>")
    assert tagged.text_of(RegionTag.OTHER) == "{oops}"


def test_unknown_object_keys_are_other() -> None:
    tagged = tag_regions('<tool_call>{"name": "f", "id": 7, "arguments": {}}</tool_call>')
    assert tagged.text_of(RegionTag.TOOL_NAME) == "f"
    assert "id" in tagged.text_of(RegionTag.OTHER)
    assert "7" in tagged.text_of(RegionTag.OTHER)


def test_tagging_is_pure() -> None:
    raw = '<think>a</think><tool_call>{"name": "g", "arguments": {"k": [1, "v"]}}</tool_call>'
    assert tag_regions(raw) == tag_regions(raw)


def test_custom_template_tags() -> None:
    template = ResponseTemplate("<r>", "</r>", "<c>", "</c>")
    tagged = tag_regions('<r>hm</r><c>{"name": "f", "arguments": {}}</c>', template)
    assert tagged.text_of(RegionTag.THOUGHT) == "hm"
    assert tagged.text_of(RegionTag.TOOL_NAME) == "f"
    assert set(tag_regions("<r>hm</r>").spans) == {RegionTag.OTHER}


def test_tagged_response_lengths_must_align() -> None:
    with pytest.raises(LengthMismatch):
        TaggedResponse((1, 2), (RegionTag.OTHER,), ((0, 1), (1, 2)))


def test_region_mean_of_single_region() -> None:
    stats = region_entropy_stats(_tagged(*[RegionTag.THOUGHT] * 3), [1.0, 2.0, 3.0])
    assert stats.h_avg(RegionTag.THOUGHT) == 2.0
    assert stats.count[RegionTag.THOUGHT] == 3


def test_absent_region_is_not_zero() -> None:
    stats = region_entropy_stats(_tagged(RegionTag.FORMAT, RegionTag.FORMAT), [0.0, 0.0])
    assert stats.h_avg(RegionTag.FORMAT) == 0.0
    assert not stats.is_absent(RegionTag.FORMAT)
    assert stats.h_avg(RegionTag.PARAMETER) is None
    assert stats.is_absent(RegionTag.PARAMETER)
    assert stats.count[RegionTag.PARAMETER] == 0


def test_mixed_region_means() -> None:
    tagged = _tagged(
        RegionTag.FORMAT,
        RegionTag.FORMAT,
        RegionTag.TOOL_NAME,
        RegionTag.PARAMETER,
        RegionTag.PARAMETER,
        RegionTag.THOUGHT,
    )
    stats = region_entropy_stats(tagged, [0.2, 0.4, 1.0, 0.5, 0.7, 2.0])
    assert stats.h_avg(RegionTag.FORMAT) == pytest.approx(0.3, abs=1e-15)
    assert stats.h_avg(RegionTag.TOOL_NAME) == 1.0
    assert stats.h_avg(RegionTag.PARAMETER) == pytest.approx(0.6, abs=1e-15)
    assert stats.h_avg(RegionTag.THOUGHT) == 2.0
    assert stats.is_absent(RegionTag.OTHER)


def test_region_stats_need_one_entropy_per_token() -> None:
    with pytest.raises(LengthMismatch):
        region_entropy_stats(_tagged(RegionTag.FORMAT), [0.1, 0.2])


def test_pooled_means_are_token_weighted() -> None:
    first = _tagged(RegionTag.FORMAT)
    second = _tagged(RegionTag.FORMAT, RegionTag.FORMAT, RegionTag.FORMAT)
    pooled = pooled_region_entropy([(first, [4.0]), (second, [0.0, 0.0, 0.0])])
    assert pooled.h_avg(RegionTag.FORMAT) == 1.0
    assert pooled.count[RegionTag.FORMAT] == 4
