from dataclasses import dataclass
from enum import Enum
import importlib.resources as pkg_resources
import json
import logging
import os
from typing import Any

import restkit.configs.envs

from ..data.constants import ResponseTemplate, SurrogateRule
from ..data.exceptions import ConfigError
from ..objectives.Curriculum import WeightConfig
from ..objectives.ToyTrainer import TrainConfig
from ..policy.ToyEnv import ToyEnv
from ..reward.RewardScorer import RewardConfig

logger = logging.getLogger(__name__)


class ConfigType(Enum):
    CONF_MAIN = 0
    CONF_ENV = 1


DEFAULT_MAIN_CONFIG: dict[str, Any] = {
    # Reward
    "beta_acc": 0.8,
    "beta_fmt": 0.2,
    "dynamic_scaling": True,
    # Region weights and schedule
    "w_min": 0.5,
    "w_max": 3.0,
    "alpha_f": 1.0,
    "alpha_p": 1.0,
    "alpha_t": 0.5,
    "surrogate_rule": "inv_one_minus_exp",
    "normalization": "sequence",
    "curriculum": True,
    "thought_gradients": True,
    "other_weight": 1.0,
    # Losses
    "epsilon_clip": 0.2,
    "delta": 1e-6,
    "delta_w": 0.0,
    "kl_coeff": 0.0,
    # Training
    "group_size": 8,
    "learning_rate": 0.5,
    "inner_steps": 1,
    "init_scale": 0.0,
    # The file will be looked for as a path first, otherwise among the packaged environments
    "env": "toy_tool_call",
    # Variance simulation
    "simulate_env": "heterogeneous_beta",
    "n_groups": 2000,
    "n_bootstrap": 1000,
    "beta_samples": 2000,
    "workers": 1,
    # Response template
    "think_open": "<think>",
    "think_close": "</think>",
    "call_open": "<tool_call>",
    "call_close": "</tool_call>",
}

_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


def _coerce(key: str, raw: str) -> Any:
    """Parses a config value to the type of its default."""
    default = DEFAULT_MAIN_CONFIG[key]
    text = raw.strip()
    try:
        if isinstance(default, bool):
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError as e:
        raise ConfigError(f"Invalid value for {key}: {e}") from e
    return text


def parse_key_values(text: str, filename: str = "<config>") -> dict[str, Any]:
    """Reads flat `key=value` lines; `#` starts a comment."""
    data: dict[str, Any] = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"{filename}:{line_number}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in content.split("=", 1))
        if key not in DEFAULT_MAIN_CONFIG:
            raise ConfigError(f"{filename}:{line_number}: Unsupported config entry: {key}")
        data[key] = _coerce(key, value)
    return data


@dataclass
class Config:
    type: ConfigType
    filename: str
    data: dict[Any, Any] | None = None

    def __post_init__(self) -> None:
        # If data not set manually, load it from the filename
        if self.data is None:
            path = self._find_config_path(self.filename, self.type)
            with open(path, "r", encoding="utf-8") as f:
                if self.type == ConfigType.CONF_MAIN:
                    self.data = parse_key_values(f.read(), self.filename)
                else:
                    try:
                        self.data = json.load(f)
                    except json.JSONDecodeError as e:
                        raise ConfigError(f"{path}: invalid JSON: {e}") from e
            return

        assert self.data is not None, "ERROR: Config has no data"

    @staticmethod
    def _find_config_path(filename: str, type: ConfigType) -> str:
        # If the filename exists, use that
        if os.path.exists(filename):
            return os.path.realpath(filename)

        # Otherwise check for packaged files
        if type == ConfigType.CONF_ENV:
            name = filename if filename.endswith(".json") else f"{filename}.json"
            resource = pkg_resources.files(restkit.configs.envs) / name
            if resource.is_file():
                return str(resource)
            raise ConfigError(f"Unknown environment: {filename}")

        raise ConfigError(f"Config file not found: {filename}")

    def __getitem__(self, key: str) -> Any:
        assert self.data is not None, "ERROR: Config has no data"
        if key not in self.data:
            logger.warning("Key %s not found in %s", key, self.type.name)
            return None
        return self.data[key]


def verify_main_config(in_config: Config) -> Config:
    assert (
        in_config.type == ConfigType.CONF_MAIN
    ), "ERROR: verify_main_config only for Configs of type CONF_MAIN"
    assert in_config.data is not None, "ERROR: Config has no data"

    # Ensure no unsupported entries are present
    extra_keys = set(in_config.data.keys()) - set(DEFAULT_MAIN_CONFIG.keys())
    if extra_keys:
        raise ConfigError(f"Unsupported config entries found: {sorted(extra_keys)}")

    # Merge the default values with the provided config, ensuring no missing keys
    return Config(
        type=in_config.type,
        filename=in_config.filename,
        data={**DEFAULT_MAIN_CONFIG, **in_config.data},
    )


def load_main_config(path: str | None = None) -> Config:
    """The run configuration from an explicit file, or the defaults."""
    if path is None:
        return Config(ConfigType.CONF_MAIN, "<defaults>", dict(DEFAULT_MAIN_CONFIG))
    return verify_main_config(Config(ConfigType.CONF_MAIN, path))


def dump_main_config(config: Config | None = None) -> str:
    """Every key with its effective value, in key=value form."""
    data = DEFAULT_MAIN_CONFIG if config is None or config.data is None else config.data
    lines = []
    for key in DEFAULT_MAIN_CONFIG:
        value = data[key]
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def reward_config_from(config: Config) -> RewardConfig:
    return RewardConfig(
        beta_acc=config["beta_acc"],
        beta_fmt=config["beta_fmt"],
        dynamic_scaling=config["dynamic_scaling"],
    )


def template_from(config: Config) -> ResponseTemplate:
    template = ResponseTemplate(
        think_open=config["think_open"],
        think_close=config["think_close"],
        call_open=config["call_open"],
        call_close=config["call_close"],
    )
    if len(set(template.delimiters)) != 4:
        raise ConfigError("Template delimiters must be distinct")
    return template


def weight_config_from(config: Config) -> WeightConfig:
    try:
        rule = SurrogateRule(config["surrogate_rule"])
    except ValueError as e:
        raise ConfigError(f"Unknown surrogate_rule: {config['surrogate_rule']!r}") from e
    return WeightConfig(
        w_min=config["w_min"],
        w_max=config["w_max"],
        alpha_f=config["alpha_f"],
        alpha_p=config["alpha_p"],
        alpha_t=config["alpha_t"],
        epsilon_clip=config["epsilon_clip"],
        delta=config["delta"],
        delta_w=config["delta_w"],
        kl_coeff=config["kl_coeff"],
        surrogate_rule=rule,
        normalization=config["normalization"],
        curriculum=config["curriculum"],
        thought_gradients=config["thought_gradients"],
        other_weight=config["other_weight"],
    )


def train_config_from(config: Config) -> TrainConfig:
    return TrainConfig(
        group_size=config["group_size"],
        learning_rate=config["learning_rate"],
        inner_steps=config["inner_steps"],
        init_scale=config["init_scale"],
        weights=weight_config_from(config),
    )


def load_env(name_or_path: str, config: Config | None = None) -> ToyEnv:
    """An environment by packaged name or JSON file path."""
    main = config if config is not None else load_main_config()
    env_config = Config(ConfigType.CONF_ENV, name_or_path)
    assert env_config.data is not None, "ERROR: Config has no data"
    env = ToyEnv.from_record(
        env_config.data, reward_config_from(main), template_from(main)
    )
    logger.info(
        "Loaded environment %s (V=%d, T=%d, %d contexts)",
        env.name,
        env.vocab_size,
        env.horizon,
        env.n_contexts,
    )
    return env
