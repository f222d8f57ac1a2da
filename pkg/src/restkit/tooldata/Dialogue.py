"""Samples, dialogues and the multi-turn to single-step decomposition.

Dataset files are line-delimited JSON. A sample line looks like
`{"id", "context": [{"role", "content"}], "target", "gold_calls": [...]}`, a
dialogue line like `{"id", "turns": [{"context", "action", "gold_calls"}]}`.
"""

import dataclasses
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from ..data.exceptions import DataError
from .ToolCall import ToolCallSet

logger = logging.getLogger(__name__)

ROLES = ("user", "assistant", "tool")


@dataclasses.dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise DataError(f"Unsupported message role: {self.role!r}")

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "Message":
        return cls(role=str(record["role"]), content=str(record["content"]))

    def to_record(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}


def _check_context(context: tuple[Message, ...], what: str) -> None:
    if not context:
        raise DataError(f"{what}: context must not be empty")
    if context[-1].role not in ("user", "tool"):
        raise DataError(f"{what}: context must end with a user or tool message")


@dataclasses.dataclass(frozen=True)
class Sample:
    """A single-step instance: a conversation so far and the action to take."""

    id: str
    context: tuple[Message, ...]
    target_response: str
    gold_calls: ToolCallSet = ToolCallSet()

    def __post_init__(self) -> None:
        _check_context(self.context, f"Sample {self.id!r}")

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "Sample":
        return cls(
            id=str(record["id"]),
            context=tuple(Message.from_record(m) for m in record["context"]),
            target_response=str(record.get("target", "")),
            gold_calls=ToolCallSet.from_records(record.get("gold_calls", [])),
        )

    def to_record(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "context": [m.to_record() for m in self.context],
            "target": self.target_response,
            "gold_calls": self.gold_calls.to_records(),
        }


@dataclasses.dataclass(frozen=True)
class Turn:
    """One interaction step: new messages, then the assistant's action."""

    context_delta: tuple[Message, ...]
    action: str
    gold_calls: ToolCallSet = ToolCallSet()


@dataclasses.dataclass(frozen=True)
class Dialogue:
    id: str
    turns: tuple[Turn, ...]

    def __post_init__(self) -> None:
        if not self.turns:
            raise DataError(f"Dialogue {self.id!r} has no turns")
        for k, turn in enumerate(self.turns):
            _check_context(turn.context_delta, f"Dialogue {self.id!r} turn {k}")

    def __len__(self) -> int:
        return len(self.turns)

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "Dialogue":
        turns = tuple(
            Turn(
                context_delta=tuple(Message.from_record(m) for m in t["context"]),
                action=str(t["action"]),
                gold_calls=ToolCallSet.from_records(t.get("gold_calls", [])),
            )
            for t in record["turns"]
        )
        return cls(id=str(record["id"]), turns=turns)


def decompose_dialogue(dialogue: Dialogue) -> list[Sample]:
    """Splits a K-turn dialogue into K single-step samples.

    Sample k sees every earlier context delta and assistant action followed by
    turn k's own context delta, and is supervised with turn k's action.

    Args:
        dialogue (Dialogue): The dialogue to split.

    Returns:
        list[Sample]: Exactly len(dialogue) samples with nested contexts.
    """
    samples = []
    history: list[Message] = []
    for k, turn in enumerate(dialogue.turns, start=1):
        history.extend(turn.context_delta)
        samples.append(
            Sample(
                id=f"{dialogue.id}/{k}",
                context=tuple(history),
                target_response=turn.action,
                gold_calls=turn.gold_calls,
            )
        )
        history.append(Message("assistant", turn.action))
    return samples


def _iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{line_number}: invalid JSON: {e}") from e
            if not isinstance(record, Mapping):
                raise DataError(f"{path}:{line_number}: expected a JSON object")
            yield line_number, dict(record)


def _load_records(path: str | Path, build: Any, what: str) -> list[Any]:
    items = []
    for line_number, record in _iter_jsonl(path):
        try:
            items.append(build(record))
        except (AttributeError, KeyError, TypeError) as e:
            raise DataError(f"{path}:{line_number}: malformed {what} record: {e}") from e
    if not items:
        raise DataError(f"{path}: no {what} records found")
    logger.info("Loaded %d %s records from %s", len(items), what, path)
    return items


def load_samples(path: str | Path) -> list[Sample]:
    return _load_records(path, Sample.from_record, "sample")


def load_dialogues(path: str | Path) -> list[Dialogue]:
    return _load_records(path, Dialogue.from_record, "dialogue")


def load_predictions(path: str | Path) -> dict[str, str]:
    """Reads `{"id", "response"}` lines into an id -> raw response map."""

    def build(record: Mapping[str, Any]) -> tuple[str, str]:
        response = record.get("response", record.get("target"))
        if response is None:
            raise KeyError("response")
        return str(record["id"]), str(response)

    return dict(_load_records(path, build, "prediction"))


def load_responses(path: str | Path) -> list[tuple[int, str]]:
    """Reads one raw response per line, keyed by line number.

    A line holding a JSON object is taken as a prediction record and its
    `response` field is used. Every other non-blank line is the response text
    itself. Lines are never merged, even when records share an id.
    """
    responses = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            raw = line.rstrip("\r\n")
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError:
                record = None
            if isinstance(record, Mapping):
                response = record.get("response", record.get("target"))
                if response is None:
                    raise DataError(f"{path}:{line_number}: record has no response field")
                raw = str(response)
            responses.append((line_number, raw))
    if not responses:
        raise DataError(f"{path}: no responses found")
    logger.info("Loaded %d responses from %s", len(responses), path)
    return responses


def dump_samples(samples: Iterable[Sample]) -> str:
    """Samples as line-delimited JSON text."""
    return "".join(
        json.dumps(sample.to_record(), ensure_ascii=False) + "\n" for sample in samples
    )
