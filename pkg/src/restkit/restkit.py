"""RestKit module.

This module contains the RestKit class, which ties the configuration, the data
files and the library modules together for each CLI subcommand.
"""

import csv
import dataclasses
import logging
import math
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .configs.configs import (
    Config,
    load_env,
    load_main_config,
    reward_config_from,
    template_from,
    train_config_from,
    weight_config_from,
)
from .data.constants import BetaKind, RegionTag
from .data.exceptions import DataError
from .estimators.OptimalWeights import BetaProfile, minimized_bound, profile_from_entropies
from .estimators.VarianceSimulation import VarianceReport, variance_table
from .objectives.Curriculum import (
    curriculum_update,
    init_region_weights,
    normalize_weights,
)
from .objectives.ToyTrainer import (
    ComparisonRow,
    TrainResult,
    paired_comparison,
    train_toy,
)
from .policy.SoftmaxPolicy import SoftmaxPolicy
from .reward.RewardScorer import RewardBreakdown, score_response
from .tagging.RegionTagger import TaggedResponse, region_entropy_stats, tag_regions
from .tooldata.Dialogue import (
    decompose_dialogue,
    dump_samples,
    load_dialogues,
    load_predictions,
    load_responses,
    load_samples,
)

logger = logging.getLogger(__name__)

SCORE_HEADER = ("id", "s_format", "r_name", "r_para", "r_value", "s_acc", "r_final")
TAG_HEADER = ("line", "token", "tag")
WEIGHTS_HEADER = (
    "nu",
    "w_fmt",
    "w_name",
    "w_para",
    "w_thk",
    "omega_min",
    "omega_max",
    "minimized_bound",
)
SIMULATE_HEADER = (
    "weights_source",
    "trace_variance",
    "ci_low",
    "ci_high",
    "bound_value",
    "minimized_bound",
)
TRAIN_HEADER = ("step", "mean_reward", "entropy", "resp_len", "loss")
COMPARE_HEADER = ("seed", "algo", "final_reward", "final_entropy")


@dataclasses.dataclass(frozen=True)
class EntropyTrace:
    """Per-token regions and entropies read from a trace file."""

    tagged: TaggedResponse
    entropies: tuple[float, ...]
    beta: tuple[float, ...] | None


def read_entropy_trace(path: str | Path) -> EntropyTrace:
    """Reads a `position,region,entropy[,beta]` CSV file.

    Raises:
        DataError: If the file is empty or a row is malformed.
    """
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        fields = reader.fieldnames or []
        missing = {"position", "region", "entropy"} - set(fields)
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        has_beta = "beta" in fields
        rows = []
        for line_number, row in enumerate(reader, start=2):
            try:
                entropy = float(row["entropy"])
                beta = float(row["beta"]) if has_beta else None
                rows.append((int(row["position"]), RegionTag(row["region"]), entropy, beta))
            except (TypeError, ValueError) as e:
                raise DataError(f"{path}:{line_number}: malformed trace row: {e}") from e
            if not math.isfinite(entropy) or entropy < 0.0:
                raise DataError(f"{path}:{line_number}: entropy must be finite and >= 0")
            if beta is not None and (not math.isfinite(beta) or beta < 0.0):
                raise DataError(f"{path}:{line_number}: beta must be finite and >= 0")
    if not rows:
        raise DataError(f"{path}: no trace rows found")
    rows.sort(key=lambda r: r[0])
    tagged = TaggedResponse(
        tokens=tuple(r[0] for r in rows),
        spans=tuple(r[1] for r in rows),
        char_map=tuple((r[0], r[0] + 1) for r in rows),
    )
    beta = tuple(float(r[3]) for r in rows) if has_beta else None  # type: ignore[arg-type]
    return EntropyTrace(tagged, tuple(r[2] for r in rows), beta)


def format_params(policy: SoftmaxPolicy) -> str:
    """`d V` header, then theta row by row."""
    lines = [f"{policy.dim} {policy.vocab_size}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in policy.theta]
    return "\n".join(lines) + "\n"


def read_params(path: str | Path) -> np.ndarray:
    """Reads a parameter file written by format_params."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [line.split() for line in f if line.strip()]
    try:
        d, v = (int(x) for x in lines[0])
        theta = np.array([[float(x) for x in row] for row in lines[1:]], dtype=np.float64)
    except (IndexError, ValueError) as e:
        raise DataError(f"{path}: malformed parameter file: {e}") from e
    if theta.shape != (d, v):
        raise DataError(f"{path}: expected {d}x{v} values, got {theta.shape}")
    return theta


class RestKit:
    """RestKit runs the experiments behind each CLI subcommand.

    Attributes:
        config (Config): The verified run configuration.
        template (ResponseTemplate): Delimiters used for parsing and tagging.
        reward_cfg (RewardConfig): Reward weights.
        weight_cfg (WeightConfig): Region weighting settings.
    """

    def __init__(self, config: Config | None = None) -> None:
        self.config = config if config is not None else load_main_config()
        self.template = template_from(self.config)
        self.reward_cfg = reward_config_from(self.config)
        self.weight_cfg = weight_config_from(self.config)

    def config_snapshot(self) -> dict[str, Any]:
        assert self.config.data is not None, "ERROR: Config has no data"
        return dict(self.config.data)

    def score(
        self, pred_path: str, gold_path: str, nu: float = 0.0
    ) -> list[tuple[str, RewardBreakdown]]:
        """Scores every gold sample against its prediction.

        A sample without a prediction is scored as an empty response.
        """
        gold = load_samples(gold_path)
        predictions = load_predictions(pred_path)
        unknown = set(predictions) - {sample.id for sample in gold}
        if unknown:
            logger.warning("Ignoring %d predictions without a gold sample", len(unknown))
        results = []
        for sample in gold:
            if sample.id not in predictions:
                logger.warning("No prediction for sample %s, scoring it as empty", sample.id)
            raw = predictions.get(sample.id, "")
            results.append(
                (
                    sample.id,
                    score_response(raw, sample.gold_calls, self.template, self.reward_cfg, nu),
                )
            )
        return results

    @staticmethod
    def score_rows(results: Sequence[tuple[str, RewardBreakdown]]) -> list[tuple[Any, ...]]:
        rows: list[tuple[Any, ...]] = []
        for sample_id, b in results:
            rows.append(
                (sample_id, b.s_format, b.r_name, b.r_para, b.r_value, b.s_acc, b.r_final)
            )
        columns = list(zip(*[row[1:] for row in rows]))
        rows.append(("__mean__",) + tuple(math.fsum(c) / len(c) for c in columns))
        return rows

    def tag(self, input_path: str) -> list[tuple[int, str, str]]:
        """One row per byte token of every response, numbered by input line."""
        rows = []
        for line, raw in load_responses(input_path):
            tagged = tag_regions(raw, self.template)
            for token, tag in zip(tagged.tokens, tagged.spans):
                text = bytes([token]).decode("utf-8", errors="backslashreplace")
                rows.append((line, text, tag.value))
        return rows

    @staticmethod
    def decompose(input_path: str) -> str:
        samples = [
            sample
            for dialogue in load_dialogues(input_path)
            for sample in decompose_dialogue(dialogue)
        ]
        return dump_samples(samples)

    def weights_report(
        self, trace_path: str, nu_grid: Sequence[float]
    ) -> list[tuple[float, ...]]:
        """Scheduled region weights and bounds of one entropy trace over a nu grid."""
        trace = read_entropy_trace(trace_path)
        stats = region_entropy_stats(trace.tagged, trace.entropies)
        initial = init_region_weights(stats, self.weight_cfg)
        beta = (
            BetaProfile(trace.beta, BetaKind.MONTE_CARLO)
            if trace.beta is not None
            else profile_from_entropies(trace.entropies)
        )
        bound = minimized_bound(beta)
        rows = []
        for nu in nu_grid:
            state = curriculum_update(initial, self.weight_cfg, nu)
            omega = normalize_weights(trace.tagged, state, self.weight_cfg)
            rows.append(
                (
                    nu,
                    state[RegionTag.FORMAT],
                    state[RegionTag.TOOL_NAME],
                    state[RegionTag.PARAMETER],
                    state[RegionTag.THOUGHT],
                    float(omega.min()),
                    float(omega.max()),
                    bound,
                )
            )
        return rows

    def simulate(
        self, env_name: str | None, seed: int, n_groups: int | None = None
    ) -> list[VarianceReport]:
        env = load_env(env_name or self.config["simulate_env"], self.config)
        return variance_table(
            env.initial_policy(),
            env,
            n_groups or self.config["n_groups"],
            self.config["group_size"],
            seed,
            n_boot=self.config["n_bootstrap"],
            delta=self.config["delta"],
            workers=self.config["workers"],
            beta_samples=self.config["beta_samples"],
        )

    def train(self, env_name: str | None, algo: str, steps: int, seed: int) -> TrainResult:
        env = load_env(env_name or self.config["env"], self.config)
        return train_toy(env, algo, steps, seed, train_config_from(self.config))

    def compare(
        self, env_name: str | None, steps: int, seeds: Sequence[int]
    ) -> list[ComparisonRow]:
        env = load_env(env_name or self.config["env"], self.config)
        return paired_comparison(env, steps, seeds, train_config_from(self.config))
