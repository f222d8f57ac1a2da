import os

from ..data.exceptions import ConfigError

SEED_ENV_VAR = "REST_KIT_SEED"


def resolve_seed(seed: int) -> int:
    """The seed to use: REST_KIT_SEED when it is set, otherwise seed."""
    override = os.environ.get(SEED_ENV_VAR)
    if override is None or not override.strip():
        return seed
    try:
        return int(override)
    except ValueError as e:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {override!r}") from e


def replicate_seed(base_seed: int, index: int) -> int:
    """Seed of replicate (or worker) number index."""
    return base_seed + index
