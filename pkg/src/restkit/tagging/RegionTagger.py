"""Region tagging of tokenized responses.

Tokens are bytes of the UTF-8 encoded response, so token spans and character
spans coincide and every region boundary is exact. Each token gets exactly one
RegionTag:

- FORMAT: the template delimiters, plus JSON punctuation, quotes and the
  structural field names ("name", "arguments") inside a tool-call body.
- TOOL_NAME: the text of the "name" value.
- PARAMETER: argument keys and argument values.
- THOUGHT: everything between the thought delimiters.
- OTHER: anything else, including whitespace between and inside structures.
"""

import dataclasses
import json
import math
import re
from typing import Callable, Iterable, Sequence

from ..data.constants import DEFAULT_TEMPLATE, RegionTag, ResponseTemplate
from ..data.exceptions import LengthMismatch

_JSON_TOKEN = re.compile(
    rb'(?P<ws>\s+)'
    rb'|(?P<str>"(?:[^"\\]|\\.)*")'
    rb"|(?P<num>-?(?:0|[1-9][0-9]*)(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?)"
    rb"|(?P<lit>true|false|null|NaN|-?Infinity)"
    rb"|(?P<punct>[{}\[\]:,])",
    re.DOTALL,
)


def tokenize(raw: str) -> tuple[list[int], list[tuple[int, int]]]:
    """Byte-level tokenization.

    Args:
        raw (str): The text to tokenize.

    Returns:
        tuple[list[int], list[tuple[int, int]]]: Token ids (byte values) and the
        (start, end) offset of each token in the encoded response.
    """
    data = raw.encode("utf-8")
    return list(data), [(i, i + 1) for i in range(len(data))]


def detokenize(tokens: Sequence[int]) -> str:
    return bytes(tokens).decode("utf-8")


@dataclasses.dataclass(frozen=True)
class TaggedResponse:
    """A tokenized response with one region tag per token."""

    tokens: tuple[int, ...]
    spans: tuple[RegionTag, ...]
    char_map: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if len(self.spans) != len(self.tokens) or len(self.char_map) != len(self.tokens):
            raise LengthMismatch(
                f"{len(self.tokens)} tokens but {len(self.spans)} tags "
                f"and {len(self.char_map)} spans"
            )

    def __len__(self) -> int:
        return len(self.tokens)

    def counts(self) -> dict[RegionTag, int]:
        """Number of tokens per region, every region present as a key."""
        counts = {tag: 0 for tag in RegionTag}
        for tag in self.spans:
            counts[tag] += 1
        return counts

    def indices(self, tag: RegionTag) -> list[int]:
        return [t for t, span in enumerate(self.spans) if span is tag]

    def text_of(self, tag: RegionTag) -> str:
        """Concatenated text of the tokens carrying `tag` (for inspection)."""
        return bytes(tok for tok, span in zip(self.tokens, self.spans) if span is tag).decode(
            "utf-8", errors="replace"
        )


class _BodyError(Exception):
    pass


class _BodyTagger:
    """Tags the inside of one tool-call block from its JSON token stream."""

    def __init__(self, body: bytes, offset: int, tags: list[RegionTag]) -> None:
        self.body = body
        self.offset = offset
        self.tags = tags
        self.tokens: list[tuple[str, int, int]] = []
        pos = 0
        while pos < len(body):
            match = _JSON_TOKEN.match(body, pos)
            if match is None:
                raise _BodyError(f"unexpected byte at {pos}")
            kind = match.lastgroup
            assert kind is not None
            if kind != "ws":
                self.tokens.append((kind, match.start(), match.end()))
            pos = match.end()
        self.i = 0

    def _mark(self, start: int, end: int, tag: RegionTag) -> None:
        for k in range(self.offset + start, self.offset + end):
            self.tags[k] = tag

    def _peek(self) -> tuple[str, int, int]:
        if self.i >= len(self.tokens):
            raise _BodyError("unexpected end of body")
        return self.tokens[self.i]

    def _next(self) -> tuple[str, int, int]:
        token = self._peek()
        self.i += 1
        return token

    def _punct(self, expected: bytes) -> None:
        kind, start, end = self._next()
        if kind != "punct" or self.body[start:end] != expected:
            raise _BodyError(f"expected {expected!r}")
        self._mark(start, end, RegionTag.FORMAT)

    def _is_punct(self, value: bytes) -> bool:
        if self.i >= len(self.tokens):
            return False
        kind, start, end = self.tokens[self.i]
        return kind == "punct" and self.body[start:end] == value

    def _string(self, inner: RegionTag) -> str:
        kind, start, end = self._next()
        if kind != "str":
            raise _BodyError("expected a string")
        self._mark(start, start + 1, RegionTag.FORMAT)
        self._mark(start + 1, end - 1, inner)
        self._mark(end - 1, end, RegionTag.FORMAT)
        try:
            return str(json.loads(self.body[start:end]))
        except ValueError as e:
            raise _BodyError(str(e)) from e

    def _value(self, region: RegionTag) -> None:
        kind, start, end = self._peek()
        if kind == "str":
            self._string(region)
        elif kind in ("num", "lit"):
            self.i += 1
            self._mark(start, end, region)
        elif self._is_punct(b"{"):
            self._members(lambda key: (region, region))
        elif self._is_punct(b"["):
            self._punct(b"[")
            while not self._is_punct(b"]"):
                self._value(region)
                if not self._is_punct(b"]"):
                    self._punct(b",")
            self._punct(b"]")
        else:
            raise _BodyError("expected a value")

    def _members(
        self, regions_for: Callable[[str], tuple[RegionTag, RegionTag]]
    ) -> None:
        """Parses an object; regions_for(key) gives (key region, value region)."""
        self._punct(b"{")
        while not self._is_punct(b"}"):
            key_start = self._peek()[1]
            key = self._string(RegionTag.OTHER)
            key_region, value_region = regions_for(key)
            self._mark(key_start + 1, self._end_of_previous() - 1, key_region)
            self._punct(b":")
            self._value(value_region)
            if not self._is_punct(b"}"):
                self._punct(b",")
        self._punct(b"}")

    def _end_of_previous(self) -> int:
        return self.tokens[self.i - 1][2]

    @staticmethod
    def _call_regions(key: str) -> tuple[RegionTag, RegionTag]:
        if key == "name":
            return RegionTag.FORMAT, RegionTag.TOOL_NAME
        if key == "arguments":
            return RegionTag.FORMAT, RegionTag.PARAMETER
        return RegionTag.OTHER, RegionTag.OTHER

    def tag(self) -> None:
        while self.i < len(self.tokens):
            if self._is_punct(b","):
                self._punct(b",")
            elif self._is_punct(b"["):
                self._punct(b"[")
                while not self._is_punct(b"]"):
                    self._members(self._call_regions)
                    if not self._is_punct(b"]"):
                        self._punct(b",")
                self._punct(b"]")
            else:
                self._members(self._call_regions)


def tag_regions(raw: str, template: ResponseTemplate = DEFAULT_TEMPLATE) -> TaggedResponse:
    """Assigns a region to every token of a raw response.

    Tagging is a pure function of (raw, template). Unmatched delimiters are
    tagged FORMAT and the text after them is left as OTHER; a tool-call body
    that does not lex as JSON is tagged OTHER as a whole.

    Args:
        raw (str): The raw response.
        template (ResponseTemplate): Delimiters to recognize.

    Returns:
        TaggedResponse: The tokens with their tags.
    """
    tokens, char_map = tokenize(raw)
    data = bytes(tokens)
    tags = [RegionTag.OTHER] * len(data)

    think_open = template.think_open.encode("utf-8")
    think_close = template.think_close.encode("utf-8")
    call_open = template.call_open.encode("utf-8")
    call_close = template.call_close.encode("utf-8")
    # Longest first, so a delimiter that prefixes another never shadows it
    delimiters = sorted(
        [think_open, think_close, call_open, call_close], key=len, reverse=True
    )

    def mark(start: int, end: int, tag: RegionTag) -> None:
        for k in range(start, end):
            tags[k] = tag

    i = 0
    while i < len(data):
        delimiter = next((d for d in delimiters if data.startswith(d, i)), None)
        if delimiter is None:
            i += 1
            continue
        mark(i, i + len(delimiter), RegionTag.FORMAT)
        body_start = i + len(delimiter)
        i = body_start
        if delimiter == think_open:
            close = data.find(think_close, body_start)
            if close == -1:
                continue
            mark(body_start, close, RegionTag.THOUGHT)
            mark(close, close + len(think_close), RegionTag.FORMAT)
            i = close + len(think_close)
        elif delimiter == call_open:
            close = data.find(call_close, body_start)
            if close == -1:
                continue
            try:
                _BodyTagger(data[body_start:close], body_start, tags).tag()
            except _BodyError:
                mark(body_start, close, RegionTag.OTHER)
            mark(close, close + len(call_close), RegionTag.FORMAT)
            i = close + len(call_close)

    return TaggedResponse(tuple(tokens), tuple(tags), tuple(char_map))


@dataclasses.dataclass(frozen=True)
class RegionEntropy:
    """Mean entropy (nats) and token count per region.

    A region without tokens has mean None, which is not the same as a region
    whose tokens all have zero entropy.
    """

    mean: dict[RegionTag, float | None]
    count: dict[RegionTag, int]

    def is_absent(self, tag: RegionTag) -> bool:
        return self.mean.get(tag) is None

    def h_avg(self, tag: RegionTag) -> float | None:
        return self.mean.get(tag)

    @classmethod
    def from_sums(
        cls, sums: dict[RegionTag, list[float]]
    ) -> "RegionEntropy":
        mean: dict[RegionTag, float | None] = {}
        count: dict[RegionTag, int] = {}
        for tag in RegionTag:
            values = sums.get(tag, [])
            count[tag] = len(values)
            mean[tag] = math.fsum(values) / len(values) if values else None
        return cls(mean=mean, count=count)


def _collect(
    tagged: TaggedResponse,
    per_token_entropy: Sequence[float],
    into: dict[RegionTag, list[float]],
) -> None:
    if len(per_token_entropy) != len(tagged):
        raise LengthMismatch(
            f"{len(per_token_entropy)} entropies for {len(tagged)} tokens"
        )
    for tag, h in zip(tagged.spans, per_token_entropy):
        assert h >= 0.0, f"ERROR: Negative entropy {h}"
        into.setdefault(tag, []).append(float(h))


def region_entropy_stats(
    tagged: TaggedResponse, per_token_entropy: Sequence[float]
) -> RegionEntropy:
    """Arithmetic mean entropy of each region of one response.

    Raises:
        LengthMismatch: If there is not exactly one entropy per token.
    """
    sums: dict[RegionTag, list[float]] = {}
    _collect(tagged, per_token_entropy, sums)
    return RegionEntropy.from_sums(sums)


def pooled_region_entropy(
    items: Iterable[tuple[TaggedResponse, Sequence[float]]]
) -> RegionEntropy:
    """Region means pooled over several responses (token-weighted)."""
    sums: dict[RegionTag, list[float]] = {}
    for tagged, entropies in items:
        _collect(tagged, entropies, sums)
    return RegionEntropy.from_sums(sums)
