# src/config.py
import hashlib
import logging
import os
from pathlib import Path
from typing import Annotated, Any, Dict, FrozenSet, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, field_validator, model_validator

from .errors import InvalidArgument

logger = logging.getLogger(__name__)

DEFAULT_SETTINGS_PATH = Path(__file__).resolve().parent.parent / "config" / "trudi_config.yaml"

COUNTER_BITS = 8
COUNTER_MODULUS = 1 << COUNTER_BITS
MAX_INDEX = (1 << 16) - 1


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# -------------------
# Hash geometry
# -------------------

class HashConfig(_Frozen):
    """Hash function and digest truncation width |K|"""
    algorithm: str = "sha256"
    key_bits: int = Field(128, ge=8, le=256)

    @field_validator("algorithm")
    @classmethod
    def _known_algorithm(cls, value: str) -> str:
        value = value.lower()
        if value.startswith("shake") or value not in hashlib.algorithms_available:
            raise ValueError(f"unsupported hash algorithm: {value}")
        return value

    @model_validator(mode="after")
    def _digest_wide_enough(self) -> "HashConfig":
        digest_bits = hashlib.new(self.algorithm).digest_size * 8
        if self.key_bits > digest_bits:
            raise ValueError(f"{self.algorithm} yields {digest_bits} bits, {self.key_bits} requested")
        return self

    @property
    def key_bytes(self) -> int:
        return (self.key_bits + 7) // 8

    @property
    def tail_mask(self) -> int:
        """Mask applied to the last key octet when key_bits is not a multiple of 8"""
        return (0xFF << (self.key_bytes * 8 - self.key_bits)) & 0xFF


# -------------------
# Strategies
# -------------------

class BasicStrategy(_Frozen):
    kind: Literal["basic"] = "basic"
    n: int = Field(ge=1, le=MAX_INDEX)
    hash: HashConfig = HashConfig()

    @property
    def q(self) -> int:
        return 1

    @property
    def slot_count(self) -> int:
        return 2

    @property
    def period_frames(self) -> int:
        return self.n

    @property
    def keys_per_period(self) -> int:
        return self.n + 1


class OverlappedStrategy(_Frozen):
    """Single chain whose last Q frames are J-frames pairing old and new keys"""
    kind: Literal["overlapped"] = "overlapped"
    n: int = Field(ge=1, le=MAX_INDEX)
    q: int = Field(ge=1)
    hash: HashConfig = HashConfig()

    @model_validator(mode="after")
    def _junction_fits(self) -> "OverlappedStrategy":
        if 2 * self.q > self.n + 1:
            raise ValueError(f"q={self.q} needs 2q <= n+1 (n={self.n})")
        return self

    @property
    def slot_count(self) -> int:
        return 2

    @property
    def period_frames(self) -> int:
        return self.n - self.q + 1

    @property
    def keys_per_period(self) -> int:
        return self.n + 1


class DualFullStrategy(_Frozen):
    """Two interleaved chains disclosed in every frame, N frames per half"""
    kind: Literal["dual_full"] = "dual_full"
    half: int = Field(ge=2)
    j_keys: Literal[2, 3] = 2
    hash: HashConfig = HashConfig()

    @model_validator(mode="after")
    def _index_fits(self) -> "DualFullStrategy":
        if self.n > MAX_INDEX:
            raise ValueError(f"chain length {self.n} exceeds the 16-bit index")
        return self

    @property
    def n(self) -> int:
        return 2 * self.half if self.j_keys == 3 else 2 * self.half - 1

    @property
    def half_length(self) -> int:
        return self.half

    @property
    def spacing(self) -> int:
        return 1

    @property
    def startup_in_junction(self) -> bool:
        return self.j_keys == 3

    @property
    def slot_count(self) -> int:
        return 3

    @property
    def period_frames(self) -> int:
        return 2 * self.half

    @property
    def keys_per_period(self) -> int:
        return 2 * (self.n + 1)


class DualSparseStrategy(_Frozen):
    """Settled chain in every frame, start-up chain every m-th frame"""
    kind: Literal["dual_sparse"] = "dual_sparse"
    n: int = Field(ge=3, le=MAX_INDEX)
    m: int = Field(ge=1)
    hash: HashConfig = HashConfig()

    @model_validator(mode="after")
    def _integral_blocks(self) -> "DualSparseStrategy":
        if (self.n + 1) % (self.m + 1) != 0:
            raise ValueError(f"n+1={self.n + 1} is not a multiple of m+1={self.m + 1}")
        if self.r < 2:
            raise ValueError("at least two blocks per half are required")
        return self

    @property
    def r(self) -> int:
        return (self.n + 1) // (self.m + 1)

    @property
    def half_length(self) -> int:
        return self.r * self.m

    @property
    def spacing(self) -> int:
        return self.m

    @property
    def startup_in_junction(self) -> bool:
        return False

    @property
    def slot_count(self) -> int:
        return 3

    @property
    def period_frames(self) -> int:
        return 2 * self.half_length

    @property
    def keys_per_period(self) -> int:
        return 2 * (self.n + 1)


StrategyConfig = Annotated[
    Union[BasicStrategy, OverlappedStrategy, DualFullStrategy, DualSparseStrategy],
    Field(discriminator="kind"),
]
STRATEGY_TYPES = (BasicStrategy, OverlappedStrategy, DualFullStrategy, DualSparseStrategy)
DUAL_TYPES = (DualFullStrategy, DualSparseStrategy)

_strategy_adapter = TypeAdapter(StrategyConfig)


def parse_strategy(value: Any):
    """Accept a strategy model or a plain mapping; bad input raises InvalidArgument"""
    if isinstance(value, STRATEGY_TYPES):
        return value
    try:
        return _strategy_adapter.validate_python(value)
    except ValidationError as e:
        raise InvalidArgument(f"invalid strategy config: {e}") from e


# -------------------
# Timing
# -------------------

class TimingConfig(_Frozen):
    """Message arrivals, receiver timeout and SC recovery latency (microseconds)"""
    period_us: int = Field(10_000, gt=0)
    arrival: Literal["periodic", "sporadic"] = "periodic"
    timeout_us: Optional[int] = Field(None, gt=0)
    timeout_policy: Literal["fixed", "junction"] = "fixed"
    recovery_latency_us: int = Field(50_000, ge=0)

    @property
    def effective_timeout_us(self) -> int:
        # Mean inter-arrival time unless set explicitly
        return self.timeout_us if self.timeout_us is not None else self.period_us


# -------------------
# Loss models
# -------------------

class BernoulliLoss(_Frozen):
    kind: Literal["bernoulli"] = "bernoulli"
    p: float = Field(0.0, ge=0.0, le=1.0)


class GilbertElliottLoss(_Frozen):
    kind: Literal["gilbert_elliott"] = "gilbert_elliott"
    p_gb: float = Field(0.01, ge=0.0, le=1.0)
    p_bg: float = Field(0.3, ge=0.0, le=1.0)
    e_g: float = Field(0.001, ge=0.0, le=1.0)
    e_b: float = Field(0.9, ge=0.0, le=1.0)


class ScheduleLoss(_Frozen):
    """Explicit set of dropped frame ordinals (first frame is 1)"""
    kind: Literal["schedule"] = "schedule"
    drops: List[int] = Field(default_factory=list)

    @field_validator("drops")
    @classmethod
    def _positive(cls, value: List[int]) -> List[int]:
        if any(d < 1 for d in value):
            raise ValueError("frame ordinals start at 1")
        return sorted(set(value))

    @property
    def drop_set(self) -> FrozenSet[int]:
        return frozenset(self.drops)


LossModel = Annotated[
    Union[BernoulliLoss, GilbertElliottLoss, ScheduleLoss],
    Field(discriminator="kind"),
]


# -------------------
# Adversaries
# -------------------

class MasqueradeAttack(_Frozen):
    """Insider forging frames with guessed or replayed keys"""
    kind: Literal["masquerade"] = "masquerade"
    injection_rate: float = Field(1.0, gt=0.0, description="forged frames per licit period")
    key_guess: Literal["random", "replay"] = "random"


class DosSpamAttack(_Frozen):
    kind: Literal["dos_spam"] = "dos_spam"
    rate: float = Field(10.0, gt=0.0, description="forged frames per licit period")


class BruteForceAttack(_Frozen):
    """Pre-image search against each disclosed root, R_H hashes per simulated second"""
    kind: Literal["brute_force"] = "brute_force"
    hash_rate: int = Field(gt=0)
    trials: int = Field(1, ge=1)
    trial_length: Optional[int] = Field(None, gt=0)
    workers: int = Field(1, ge=1)


AdversaryConfig = Annotated[
    Union[MasqueradeAttack, DosSpamAttack, BruteForceAttack],
    Field(discriminator="kind"),
]


# -------------------
# Scenario
# -------------------

class Scenario(_Frozen):
    name: str = "scenario"
    strategy: StrategyConfig
    loss: LossModel = BernoulliLoss()
    frame_count: int = Field(ge=1)
    timing: TimingConfig = TimingConfig()
    seed: int = Field(0, ge=0)
    adversary: Optional[AdversaryConfig] = None
    sc_id: int = Field(1, ge=0, le=0xFFFF)
    src_id: int = Field(1, ge=0, le=0xFFFF)
    message_bytes: int = Field(8, ge=0, le=0xFFFF)
    backtrack_cap: Optional[int] = Field(None, ge=0)

    @model_validator(mode="after")
    def _covers_a_period(self) -> "Scenario":
        if self.frame_count < self.strategy.period_frames:
            raise ValueError(
                f"frame_count={self.frame_count} is shorter than one period "
                f"({self.strategy.period_frames} frames)"
            )
        return self


class Settings(_Frozen):
    """Defaults read from config/trudi_config.yaml"""
    hash: HashConfig = HashConfig()
    timing: TimingConfig = TimingConfig()
    sweep_workers: int = Field(4, ge=1)
    service_max_frames: int = Field(200_000, ge=1)


def _read_yaml(path: Union[str, Path]) -> Dict:
    path = Path(path)
    if not path.exists():
        raise InvalidArgument(f"File not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise InvalidArgument(f"{path}: not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise InvalidArgument(f"{path}: expected a mapping at top level")
    return data


def load_settings(path: Optional[Union[str, Path]] = None) -> Settings:
    path = path or os.getenv("TRUDI_CONFIG") or DEFAULT_SETTINGS_PATH
    if not Path(path).exists():
        logger.warning(f"Settings file {path} not found, using built-in defaults")
        return Settings()
    return Settings.model_validate(_read_yaml(path))


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read a YAML scenario file; schema errors surface as pydantic.ValidationError"""
    scenario = Scenario.model_validate(_read_yaml(path))
    logger.info(f"Loaded scenario '{scenario.name}' from {path}")
    return scenario


def load_adversary(path: Union[str, Path]):
    data = _read_yaml(path)
    # An attack file may hold the adversary alone or under an "adversary" key
    data = data.get("adversary", data)
    return TypeAdapter(AdversaryConfig).validate_python(data)


def scenario_dump(scenario: Scenario) -> Dict:
    return scenario.model_dump(mode="json")


def strategy_label(config) -> str:
    if isinstance(config, BasicStrategy):
        return f"basic(n={config.n})"
    if isinstance(config, OverlappedStrategy):
        return f"overlapped(n={config.n}, q={config.q})"
    if isinstance(config, DualFullStrategy):
        return f"dual_full(N={config.half}, j_keys={config.j_keys})"
    return f"dual_sparse(n={config.n}, m={config.m}, r={config.r})"


def dual_geometry(config) -> Tuple[int, int, bool]:
    """(half length H, start-up spacing m, start-up key in J-frames)"""
    return config.half_length, config.spacing, config.startup_in_junction
