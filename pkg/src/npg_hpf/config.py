import dataclasses
import types
from dataclasses import dataclass
from pathlib import Path

from npg.conf import IniData

from npg_hpf.envs import ENV_NAMES

"""Run configuration.

A run is configured by the [RUN] section of an INI file, one key per
`RunConfig` field, e.g.

    [RUN]
    algo = hpf-wq
    env = matrix
    seed = 1

Fields that are not set keep their defaults. Fields defaulting to None are
resolved from the environment and algorithm by `RunConfig.resolve`.
"""

RUN_CONFIG_FILE_SECTION = "RUN"

ALGORITHMS = ("vdn", "qmix", "wqmix", "qplex", "hpf-wq", "hpf-qv")
ESTIMATORS = ("additive", "optimistic")
SAMPLERS = ("boltzmann", "random")
OPTIMIZERS = ("rmsprop", "adam")
EPSILON_MODES = ("linear_anneal", "constant")
TEST_POLICIES = ("beta", "alpha", "composite")

"Training length in environment steps by environment."
DEFAULT_MAX_STEPS = {"matrix": 20000, "pp-small": 500000, "pp": 2000000}

_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


class ConfigError(ValueError):
    """An exception raised when a run configuration is invalid."""

    pass


@dataclass
class RunConfig:
    algo: str = "hpf-wq"
    """One of vdn, qmix, wqmix, qplex (single learners) or hpf-wq, hpf-qv
    (fused pairs: WQMIX with QMIX, QPLEX with VDN)."""
    estimator: str = "optimistic"
    sampler: str = "boltzmann"
    env: str = "matrix"
    seed: int = 0
    max_steps: int | None = None

    gamma: float = 0.99
    lr: float = 5e-4
    temperature: float = 1.0
    """The Boltzmann temperature of policy sampling."""
    wqmix_alpha: float = 0.1
    """The weight of joint TD errors of non-greedy, overestimated actions."""
    wqmix_weighted: bool = True

    batch_size: int = 32
    buffer_size: int = 5000
    target_update_episodes: int = 200
    eval_interval_steps: int = 10000
    eval_episodes: int = 16

    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_anneal_steps: int = 50000
    epsilon_mode: str | None = None
    eval_epsilon: float | None = None

    optimizer: str | None = None
    rmsprop_alpha: float = 0.99
    optim_eps: float = 1e-5
    grad_norm_clip: float = 10.0

    hidden_width: int = 64
    mixing_embed: int = 32
    central_hidden: int = 64

    test_policy: str = "beta"
    """Which policy acts greedily at evaluation in fused runs."""
    instructive: bool = True
    instructive_both_sides: bool = False

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            setattr(self, f.name, _coerce(f.name, value, f.type))
        self.validate()

    @classmethod
    def from_file(cls, path: Path | str, section: str = RUN_CONFIG_FILE_SECTION):
        """Load a configuration from a section of an INI file."""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Configuration file {path} does not exist")
        return IniData(cls).from_file(path, section)

    @property
    def is_fused(self) -> bool:
        return self.algo.startswith("hpf-")

    def validate(self):
        choices = {
            "algo": ALGORITHMS,
            "estimator": ESTIMATORS,
            "sampler": SAMPLERS,
            "env": ENV_NAMES,
            "test_policy": TEST_POLICIES,
            "optimizer": OPTIMIZERS,
            "epsilon_mode": EPSILON_MODES,
        }
        for name, allowed in choices.items():
            value = getattr(self, name)
            if value is not None and value not in allowed:
                raise ConfigError(
                    f"Invalid {name} '{value}', expected one of {allowed}"
                )

        positive = (
            "lr",
            "temperature",
            "batch_size",
            "buffer_size",
            "target_update_episodes",
            "eval_interval_steps",
            "eval_episodes",
            "epsilon_anneal_steps",
            "hidden_width",
            "mixing_embed",
            "central_hidden",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive: {getattr(self, name)}")
        if self.max_steps is not None and self.max_steps <= 0:
            raise ConfigError(f"max_steps must be positive: {self.max_steps}")
        if self.batch_size > self.buffer_size:
            raise ConfigError(
                f"batch_size {self.batch_size} exceeds buffer_size "
                f"{self.buffer_size}"
            )

        if not 0 <= self.gamma <= 1:
            raise ConfigError(f"gamma must be in [0, 1]: {self.gamma}")
        if not 0 < self.wqmix_alpha <= 1:
            raise ConfigError(
                f"wqmix_alpha must be in (0, 1]: {self.wqmix_alpha}"
            )
        if not 0 <= self.epsilon_end <= self.epsilon_start <= 1:
            raise ConfigError(
                f"Epsilon must satisfy 0 <= end <= start <= 1: start "
                f"{self.epsilon_start}, end {self.epsilon_end}"
            )
        if self.eval_epsilon is not None and not 0 <= self.eval_epsilon <= 1:
            raise ConfigError(
                f"eval_epsilon must be in [0, 1]: {self.eval_epsilon}"
            )
        if self.grad_norm_clip < 0:
            raise ConfigError(
                f"grad_norm_clip must not be negative: {self.grad_norm_clip}"
            )

    def resolve(self) -> "RunConfig":
        """Return a copy with every None default replaced by its value for
        this environment and algorithm.

        The matrix game explores with constant epsilon 1 and is evaluated
        greedily; other environments anneal epsilon and are evaluated at
        epsilon 0.05. Fused runs use Adam, single learners RMSprop.
        """
        matrix = self.env == "matrix"
        resolved = {
            "max_steps": DEFAULT_MAX_STEPS[self.env],
            "epsilon_mode": "constant" if matrix else "linear_anneal",
            "eval_epsilon": 0.0 if matrix else 0.05,
            "optimizer": "adam" if self.is_fused else "rmsprop",
        }
        changes = {
            name: value
            for name, value in resolved.items()
            if getattr(self, name) is None
        }
        if matrix and self.epsilon_mode is None:
            changes["epsilon_start"] = 1.0
        return dataclasses.replace(self, **changes)

    def to_serializable(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_serializable(cls, serializable: dict):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(serializable) - known)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {unknown}")
        return cls(**serializable)


def _coerce(name: str, value, declared):
    """Convert a value read from an INI file to its declared type."""
    if isinstance(declared, types.UnionType):
        if value is None or (
            isinstance(value, str) and value.strip().lower() in ("", "none")
        ):
            return None
        (declared,) = [t for t in declared.__args__ if t is not type(None)]
    if not isinstance(value, str):
        if declared is float and isinstance(value, int):
            return float(value)
        return value

    text = value.strip()
    try:
        if declared is bool:
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
        if declared is int:
            return int(text)
        if declared is float:
            return float(text)
    except ValueError as e:
        raise ConfigError(
            f"Invalid value for {name}: '{value}', expected "
            f"{declared.__name__}"
        ) from e

    return text
