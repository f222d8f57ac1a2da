import csv
import dataclasses
import hashlib
import io
import logging
from pathlib import Path
from typing import Any, Iterable, Sequence

from .time_helper import RunClock

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest"


def format_value(value: Any) -> str:
    """CSV cell text; floats get 10 significant digits so output is stable."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def render_csv(
    header: Sequence[str], rows: Iterable[Sequence[Any]], delimiter: str = ","
) -> str:
    """Header line plus one line per row, quoted as needed."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter=delimiter, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        assert len(row) == len(header), (
            f"ERROR: Row has {len(row)} cells, header has {len(header)}"
        )
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def content_hash(paths: Iterable[str | Path]) -> str:
    """sha256 over the bytes of every input file, in order."""
    digest = hashlib.sha256()
    for path in paths:
        with open(path, "rb") as f:
            digest.update(f.read())
        digest.update(b"\0")
    return digest.hexdigest()


@dataclasses.dataclass
class RunManifest:
    """Provenance of one output file.

    Attributes:
        command (str): The subcommand that produced the output.
        config (dict[str, Any]): Snapshot of the effective configuration.
        seed (int | None): Seed used, if the command is random.
        input_hash (str): Content hash of the input files.
        outputs (list[str]): Files written by the command.
    """

    command: str
    config: dict[str, Any]
    seed: int | None = None
    input_hash: str = ""
    outputs: list[str] = dataclasses.field(default_factory=list)
    clock: RunClock = dataclasses.field(default_factory=RunClock)

    def render(self) -> str:
        lines = [
            f"command={self.command}",
            f"seed={'' if self.seed is None else self.seed}",
            f"input_hash={self.input_hash}",
            f"started={self.clock.started}",
            f"finished={self.clock.finished}",
        ]
        lines += [f"output={path}" for path in self.outputs]
        lines += [f"config.{key}={format_value(self.config[key])}" for key in sorted(self.config)]
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> Path:
        target = Path(str(path) + MANIFEST_SUFFIX)
        target.write_text(self.render(), encoding="utf-8")
        logger.info("Wrote manifest %s", target)
        return target


def emit(text: str, out: str | Path | None, manifest: RunManifest | None = None) -> str | None:
    """Writes text to out plus its manifest, or returns it for standard output.

    Text returned for standard output gets no manifest.
    """
    if out is None:
        return text
    Path(out).write_text(text, encoding="utf-8")
    if manifest is not None:
        manifest.outputs.append(str(out))
        manifest.write(out)
    return None
