# src/restkit/cli.py
"""Command-line interface for the restkit package."""

import json
import logging
import sys
from typing import Any, Sequence

import click

from .configs.configs import dump_main_config, load_main_config
from .data.exceptions import RestKitError
from .restkit import (
    COMPARE_HEADER,
    SCORE_HEADER,
    SIMULATE_HEADER,
    TAG_HEADER,
    TRAIN_HEADER,
    WEIGHTS_HEADER,
    RestKit,
    format_params,
)
from .objectives.ToyTrainer import ALGORITHMS, comparison_medians
from .utils.outputs import RunManifest, content_hash, emit, render_csv
from .utils.seeding import resolve_seed

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class RestKitGroup(click.Group):
    """Click group with restkit's exit codes: 1 for usage errors, 2 for data errors."""

    def main(self, *args: Any, **kwargs: Any) -> Any:  # type: ignore[override]
        kwargs["standalone_mode"] = False
        try:
            result = super().main(*args, **kwargs)
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except click.UsageError as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_DATA)
        except (RestKitError, OSError, json.JSONDecodeError) as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_DATA)
        # --help and friends return the exit code instead of raising
        sys.exit(result if isinstance(result, int) else EXIT_OK)


def _make_kit(config_path: str | None) -> RestKit:
    return RestKit(load_main_config(config_path))


def _input_hash(*paths: str | None) -> str:
    return content_hash([p for p in paths if p is not None])


def _finish(text: str, out: str | None, manifest: RunManifest) -> None:
    remaining = emit(text, out, manifest)
    if remaining is not None:
        click.echo(remaining, nl=False)
    else:
        click.echo(f"Wrote {out}", err=True)


def _parse_grid(text: str) -> list[float]:
    try:
        grid = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise click.BadParameter(f"not a comma-separated list of numbers: {text!r}") from e
    if not grid or any(not 0.0 <= nu <= 1.0 for nu in grid):
        raise click.BadParameter("every grid value must be in [0, 1]")
    return grid


config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Flat key=value run configuration.",
)
out_option = click.option(
    "--out",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
    help="Write the CSV here (plus a .manifest) instead of standard output.",
)
env_option = click.option(
    "--env",
    "env_name",
    type=str,
    default=None,
    help="Packaged environment name or path to an environment JSON file.",
)
seed_option = click.option(
    "--seed", type=int, default=0, show_default=True, help="Random seed (REST_KIT_SEED overrides)."
)


@click.group(cls=RestKitGroup, invoke_without_command=True)
@click.option("--verbose", "-v", is_flag=True, help="Log progress to standard error.")
@click.option("--dump-config", is_flag=True, help="Print every config key with its default.")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, dump_config: bool) -> None:
    """Rule-based tool-call rewards, entropy-aware token weighting and toy policy experiments."""
    # Without -v, warnings still reach standard error through logging's last-resort handler
    if verbose:
        logging.basicConfig(
            level=logging.INFO,
            stream=sys.stderr,
            format="%(levelname)s %(name)s: %(message)s",
        )
    if dump_config:
        click.echo(dump_main_config(), nl=False)
        ctx.exit(EXIT_OK)
    if ctx.invoked_subcommand is None:
        raise click.UsageError("Missing command.", ctx)


@cli.command()
@click.option("--pred", "pred_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--gold", "gold_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option(
    "--nu",
    type=click.FloatRange(0.0, 1.0, max_open=True),
    default=0.0,
    show_default=True,
    help="Training progress for dynamic reward scaling.",
)
@click.option("--beta-acc", type=click.FloatRange(min=0.0), default=None)
@click.option("--beta-fmt", type=click.FloatRange(min=0.0), default=None)
@config_option
@out_option
def score(
    pred_path: str,
    gold_path: str,
    nu: float,
    beta_acc: float | None,
    beta_fmt: float | None,
    config_path: str | None,
    out: str | None,
) -> None:
    """Score predicted responses against gold tool calls.

    Args:
        pred_path (str): JSONL with {"id", "response"} per line.
        gold_path (str): JSONL samples with gold calls.
        nu (float): Training progress in [0, 1).
    """
    config = load_main_config(config_path)
    assert config.data is not None
    if beta_acc is not None:
        config.data["beta_acc"] = beta_acc
    if beta_fmt is not None:
        config.data["beta_fmt"] = beta_fmt
    kit = RestKit(config)
    rows = kit.score_rows(kit.score(pred_path, gold_path, nu))
    manifest = RunManifest("score", kit.config_snapshot(), None, _input_hash(pred_path, gold_path))
    _finish(render_csv(SCORE_HEADER, rows), out, manifest)


@cli.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@config_option
@out_option
def tag(input_path: str, config_path: str | None, out: str | None) -> None:
    """Tag every byte token of each response with its region.

    The input holds one response per line, either raw text or a JSON object
    with a `response` field.
    """
    kit = _make_kit(config_path)
    rows = kit.tag(input_path)
    manifest = RunManifest("tag", kit.config_snapshot(), None, _input_hash(input_path))
    _finish(render_csv(TAG_HEADER, rows, delimiter="\t"), out, manifest)


@cli.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@out_option
def decompose(input_path: str, out: str | None) -> None:
    """Split multi-turn dialogues into single-step samples (JSONL)."""
    text = RestKit.decompose(input_path)
    manifest = RunManifest("decompose", {}, None, _input_hash(input_path))
    _finish(text, out, manifest)


@cli.command()
@click.option("--trace", "trace_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--nu-grid", default="0,0.5,1", show_default=True, help="Comma-separated progress values.")
@config_option
@out_option
def weights(trace_path: str, nu_grid: str, config_path: str | None, out: str | None) -> None:
    """Report scheduled region weights for an entropy trace over a progress grid."""
    grid = _parse_grid(nu_grid)
    kit = _make_kit(config_path)
    rows = kit.weights_report(trace_path, grid)
    manifest = RunManifest("weights", kit.config_snapshot(), None, _input_hash(trace_path))
    _finish(render_csv(WEIGHTS_HEADER, rows), out, manifest)


@cli.command()
@config_option
@seed_option
@env_option
@click.option("--n-groups", type=click.IntRange(min=100), default=None, help="Replicate groups.")
@out_option
def simulate(
    config_path: str | None, seed: int, env_name: str | None, n_groups: int | None, out: str | None
) -> None:
    """Measure estimator variance for uniform, surrogate and optimal weights."""
    seed = resolve_seed(seed)
    kit = _make_kit(config_path)
    reports = kit.simulate(env_name, seed, n_groups)
    rows = [
        (r.source.value, r.trace, r.ci_low, r.ci_high, r.bound_value, r.minimized_bound)
        for r in reports
    ]
    manifest = RunManifest("simulate", kit.config_snapshot(), seed, _input_hash(config_path))
    _finish(render_csv(SIMULATE_HEADER, rows), out, manifest)


@cli.command()
@click.option("--algo", type=click.Choice(ALGORITHMS), required=True)
@click.option("--steps", type=click.IntRange(min=1), required=True)
@seed_option
@config_option
@env_option
@out_option
@click.option(
    "--params-out",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
    help="Write the final parameters here.",
)
@click.option("--dump-config", is_flag=True, help="Print the effective configuration and exit.")
def train(
    algo: str,
    steps: int,
    seed: int,
    config_path: str | None,
    env_name: str | None,
    out: str | None,
    params_out: str | None,
    dump_config: bool,
) -> None:
    """Train a toy policy with the token-weighted (rest) or unweighted (grpo) loss."""
    kit = _make_kit(config_path)
    if dump_config:
        click.echo(dump_main_config(kit.config), nl=False)
        return
    seed = resolve_seed(seed)
    result = kit.train(env_name, algo, steps, seed)
    rows = [(r.step, r.mean_reward, r.entropy, r.resp_len, r.loss) for r in result.trace]
    manifest = RunManifest("train", kit.config_snapshot(), seed, _input_hash(config_path))
    if params_out is not None:
        with open(params_out, "w", encoding="utf-8") as f:
            f.write(format_params(result.policy))
        manifest.outputs.append(params_out)
    _finish(render_csv(TRAIN_HEADER, rows), out, manifest)


@cli.command()
@click.option("--steps", type=click.IntRange(min=1), required=True)
@click.option("--seeds", type=click.IntRange(min=1), default=5, show_default=True, help="Number of paired seeds.")
@seed_option
@config_option
@env_option
@out_option
def compare(
    steps: int,
    seeds: int,
    seed: int,
    config_path: str | None,
    env_name: str | None,
    out: str | None,
) -> None:
    """Train rest and grpo on the same seeds and report final reward and entropy.

    Pair k runs with seed + k.
    """
    base = resolve_seed(seed)
    seed_list: Sequence[int] = [base + k for k in range(seeds)]
    kit = _make_kit(config_path)
    rows = kit.compare(env_name, steps, seed_list)
    for algo, (reward, entropy) in comparison_medians(rows).items():
        click.echo(f"{algo}: median final reward {reward:.4f}, entropy {entropy:.4f}", err=True)
    manifest = RunManifest("compare", kit.config_snapshot(), base, _input_hash(config_path))
    _finish(
        render_csv(COMPARE_HEADER, [(r.seed, r.algo, r.final_reward, r.final_entropy) for r in rows]),
        out,
        manifest,
    )


if __name__ == "__main__":
    cli()
