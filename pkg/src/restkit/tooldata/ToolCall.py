"""Tool-call data model, parsing and canonical value comparison.

A tool-call block is the text between the template's call delimiters. Its body
holds one or more `{"name": ..., "arguments": {...}}` objects, either back to
back or wrapped in a JSON list.
"""

import dataclasses
import decimal
import json
import logging
from decimal import Decimal
from typing import Any, Iterable, Iterator, Mapping, Union

from ..data.constants import DEFAULT_TEMPLATE, ResponseTemplate
from ..data.exceptions import MalformedBody

logger = logging.getLogger(__name__)

CanonicalValue = Union[
    None, bool, Decimal, str, list["CanonicalValue"], dict[str, "CanonicalValue"]
]

# Wide enough that normalizing never rounds a realistic literal
_DECIMAL_CONTEXT = decimal.Context(prec=100)
_DECODER = json.JSONDecoder(
    parse_float=Decimal, parse_int=Decimal, parse_constant=Decimal
)
_SEPARATORS = " \t\r\n,"


def canonicalize_value(value: Any) -> CanonicalValue:
    """Converts a parse-tree value into its canonical form.

    Numbers become normalized decimals (so 1.0 and 1 are the same value), maps
    have their keys sorted and strings are kept byte-exact.

    Args:
        value (Any): A JSON-like value.

    Returns:
        CanonicalValue: The canonical value.
    """
    if value is None or isinstance(value, str):
        return value
    # bool is an int subclass, so it has to be checked first
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float, Decimal)):
        return _normalize_number(value)
    if isinstance(value, Mapping):
        return {str(k): canonicalize_value(value[k]) for k in sorted(value, key=str)}
    if isinstance(value, (list, tuple)):
        return [canonicalize_value(v) for v in value]
    raise TypeError(f"Unsupported value type: {type(value).__name__}")


def _normalize_number(value: int | float | Decimal) -> Decimal:
    if isinstance(value, float):
        number = Decimal(repr(value))
    else:
        number = Decimal(value)
    if number.is_nan() or number.is_infinite():
        return number
    if number.is_zero():
        return Decimal(0)
    return number.normalize(context=_DECIMAL_CONTEXT)


def canonical_key(value: CanonicalValue) -> Any:
    """Hashable key that separates booleans from numbers.

    Python treats True == Decimal(1), which is wrong for tool arguments.
    """
    if value is None:
        return ("null",)
    if isinstance(value, bool):
        return ("bool", value)
    if isinstance(value, Decimal):
        return ("num", str(value))
    if isinstance(value, str):
        return ("str", value)
    if isinstance(value, list):
        return ("list", tuple(canonical_key(v) for v in value))
    if isinstance(value, dict):
        return ("map", tuple(sorted((k, canonical_key(v)) for k, v in value.items())))
    raise TypeError(f"Not a canonical value: {value!r}")


def values_equal(a: Any, b: Any) -> bool:
    """Exact-match comparison of two argument values under canonical equality."""
    return bool(canonical_key(canonicalize_value(a)) == canonical_key(canonicalize_value(b)))


@dataclasses.dataclass(frozen=True)
class ToolCall:
    """A single tool invocation: a name and its ordered parameters."""

    name: str
    params: dict[str, CanonicalValue] = dataclasses.field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "params",
            {str(k): canonicalize_value(v) for k, v in self.params.items()},
        )

    @property
    def param_names(self) -> frozenset[str]:
        return frozenset(self.params)

    def to_record(self) -> dict[str, Any]:
        """The dataset-file form of this call."""
        return {"name": self.name, "arguments": _to_plain(self.params)}


@dataclasses.dataclass(frozen=True)
class ToolCallSet:
    """Ordered tool invocations of one prediction or one ground truth."""

    calls: tuple[ToolCall, ...] = ()

    def __iter__(self) -> Iterator[ToolCall]:
        for call in self.calls:
            yield call

    def __len__(self) -> int:
        return len(self.calls)

    def __getitem__(self, index: int) -> ToolCall:
        return self.calls[index]

    @property
    def names(self) -> frozenset[str]:
        return frozenset(call.name for call in self.calls)

    def by_name(self) -> dict[str, ToolCall]:
        """Maps each tool name to its first invocation.

        Names are scored as sets, so a repeated name only counts once.
        """
        first: dict[str, ToolCall] = {}
        for call in self.calls:
            first.setdefault(call.name, call)
        return first

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, Any]]) -> "ToolCallSet":
        """Builds a set from `{"name", "arguments"}` records."""
        return cls(tuple(_call_from_object(record) for record in records))

    def to_records(self) -> list[dict[str, Any]]:
        return [call.to_record() for call in self.calls]


def _call_from_object(item: Any) -> ToolCall:
    if not isinstance(item, Mapping):
        raise MalformedBody(f"Tool call must be an object, got {type(item).__name__}")
    name = item.get("name")
    if not isinstance(name, str):
        raise MalformedBody("Tool call has no string 'name' field")
    arguments = item.get("arguments", {})
    if isinstance(arguments, str):
        # Some serializers nest the arguments as a JSON string
        try:
            arguments = _DECODER.decode(arguments)
        except json.JSONDecodeError as e:
            raise MalformedBody(f"Arguments of {name!r} are not valid JSON: {e}") from e
    if arguments is None:
        arguments = {}
    if not isinstance(arguments, Mapping):
        raise MalformedBody(f"Arguments of {name!r} must be an object")
    return ToolCall(name=name, params=dict(arguments))


def _iter_blocks(raw: str, template: ResponseTemplate) -> Iterator[str]:
    """Yields the body of every closed tool-call block, in order."""
    pos = 0
    while True:
        start = raw.find(template.call_open, pos)
        if start == -1:
            return
        body_start = start + len(template.call_open)
        end = raw.find(template.call_close, body_start)
        if end == -1:
            # An unmatched opening delimiter encloses nothing well-formed
            return
        yield raw[body_start:end]
        pos = end + len(template.call_close)


def _decode_body(body: str) -> list[ToolCall]:
    calls: list[ToolCall] = []
    idx = 0
    while True:
        while idx < len(body) and body[idx] in _SEPARATORS:
            idx += 1
        if idx >= len(body):
            return calls
        try:
            value, idx = _DECODER.raw_decode(body, idx)
        except json.JSONDecodeError as e:
            raise MalformedBody(f"Unparseable tool-call body: {e}") from e
        items = value if isinstance(value, list) else [value]
        calls.extend(_call_from_object(item) for item in items)


def parse_tool_calls(
    raw: str, template: ResponseTemplate = DEFAULT_TEMPLATE
) -> ToolCallSet:
    """Parses every well-formed tool invocation in a raw response.

    Args:
        raw (str): The raw assistant output.
        template (ResponseTemplate): Delimiters to look for.

    Raises:
        MalformedBody: If a delimited block does not hold valid tool calls.

    Returns:
        ToolCallSet: The calls in the order they appear.
    """
    calls: list[ToolCall] = []
    for body in _iter_blocks(raw, template):
        calls.extend(_decode_body(body))
    return ToolCallSet(tuple(calls))


def parse_tool_calls_lenient(
    raw: str, template: ResponseTemplate = DEFAULT_TEMPLATE
) -> tuple[ToolCallSet, str | None]:
    """Like parse_tool_calls, but a malformed body yields an empty set.

    Returns:
        tuple[ToolCallSet, str | None]: The calls and the recorded error, if any.
    """
    try:
        return parse_tool_calls(raw, template), None
    except MalformedBody as e:
        logger.warning("Scoring malformed tool-call body as empty: %s", e)
        return ToolCallSet(), str(e)


def _dump_value(value: CanonicalValue) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Decimal):
        # str() of a Decimal is already a valid JSON number (or NaN/Infinity)
        return str(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, list):
        return "[" + ", ".join(_dump_value(v) for v in value) + "]"
    return (
        "{"
        + ", ".join(
            f"{json.dumps(k, ensure_ascii=False)}: {_dump_value(v)}"
            for k, v in value.items()
        )
        + "}"
    )


def serialize_tool_calls(
    calls: ToolCallSet, template: ResponseTemplate = DEFAULT_TEMPLATE
) -> str:
    """Renders calls as delimited blocks, one block per call.

    parse_tool_calls(serialize_tool_calls(s)) gives back s.
    """
    blocks = []
    for call in calls:
        body = (
            f'{{"name": {json.dumps(call.name, ensure_ascii=False)}, '
            f'"arguments": {_dump_value(call.params)}}}'
        )
        blocks.append(f"{template.call_open}{body}{template.call_close}")
    return "\n".join(blocks)


def _to_plain(value: CanonicalValue) -> Any:
    """Canonical value to plain JSON types (decimals become int or float)."""
    if isinstance(value, Decimal):
        if value.is_finite() and value == value.to_integral_value():
            return int(value)
        return float(value)
    if isinstance(value, list):
        return [_to_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _to_plain(v) for k, v in value.items()}
    return value
