"""Shared helpers for the restkit test suite."""

import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterator

DATA_DIR = Path(__file__).parent / "data"


def data_path(name: str) -> str:
    return str(DATA_DIR / name)


def exact(value: str | int | float) -> float:
    """A fixture value written as an exact fraction ("7/12") as a float."""
    return float(Fraction(str(value)))


class DataHelper:
    """Records of a line-delimited JSON fixture in tests/data."""

    def __init__(self, test_name: str) -> None:
        """Initializes the DataHelper object.

        Args:
            test_name (str): Fixture name without the .jsonl suffix.

        Raises:
            ValueError: If the fixture file cannot be read.
        """
        self.name = test_name
        test_file = DATA_DIR / f"{test_name}.jsonl"
        self.records: list[dict[str, Any]] = []
        with open(test_file, "r", encoding="utf-8") as file:
            try:
                self.records = [json.loads(line) for line in file if line.strip()]
            except ValueError as e:
                print(f"Error reading test data {test_file}: {e}")
                raise e
        assert len(self.records) > 0

    def __iter__(self) -> Iterator[dict[str, Any]]:
        for record in self.records:
            yield record

    def __getitem__(self, index: int) -> dict[str, Any]:
        return self.records[index]

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> list[str]:
        return [str(record["id"]) for record in self.records]
