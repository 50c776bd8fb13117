# src/adversary.py
import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from dataclasses_json import config as json_config, dataclass_json

from .config import (
    MAX_INDEX,
    BruteForceAttack,
    DosSpamAttack,
    HashConfig,
    MasqueradeAttack,
    Scenario,
)
from .errors import AttackExhausted, InvalidArgument
from .keychain import Key, hash_constructor, random_key
from .report import render_fraction
from .transmitter import init_transmitter
from .wire import AuthEntry, ScKey, UFrame, encode_frame

logger = logging.getLogger(__name__)

SECONDS_PER_YEAR = 365 * 24 * 3600


# -------------------
# Frame forgery
# -------------------

def forge_frame(
    sc_key: ScKey,
    template: UFrame,
    guess: Key,
    *,
    slot: Optional[int] = None,
    index: Optional[int] = None,
    counter: Optional[int] = None,
    freshness: Optional[int] = None,
    message: bytes = b"forged",
) -> bytes:
    """
    A frame with a valid link MAC carrying one attacker-chosen key.

    Defaults follow the template: its first significant slot, the same
    counter, the next index and the next freshness value.
    """
    present = template.present
    if slot is None:
        slot = present[0][0] if present else 1
    if not 1 <= slot <= len(template.entries):
        raise InvalidArgument(f"slot {slot} outside [1, {len(template.entries)}]")
    base = template.entries[slot - 1]
    c = counter if counter is not None else base.c
    i = index if index is not None else min(base.i + 1, MAX_INDEX)
    entries = [AuthEntry.absent()] * len(template.entries)
    entries[slot - 1] = AuthEntry(tau=True, c=c, i=i, key=guess)
    frame = UFrame(
        link_info=template.link_info,
        freshness=freshness if freshness is not None else template.freshness + 1,
        entries=tuple(entries),
        message=message,
    )
    return encode_frame(frame, sc_key)


# -------------------
# Brute-force pre-image search
# -------------------

@dataclass(frozen=True)
class ForgedChain:
    """Keys X_0..X_n with X_0 equal to the attacked root; X_n is the usable seed"""
    keys: Tuple[Key, ...]
    hashes: int

    @property
    def seed(self) -> Key:
        return self.keys[-1]

    @property
    def n(self) -> int:
        return len(self.keys) - 1


def _stepper(hash: HashConfig) -> Callable[[bytes], bytes]:
    h = hash_constructor(hash.algorithm)
    kb = hash.key_bytes
    mask = hash.tail_mask
    if mask == 0xFF:
        return lambda x: h(x).digest()[:kb]

    def step(x: bytes) -> bytes:
        d = h(x).digest()
        return d[: kb - 1] + bytes((d[kb - 1] & mask,))

    return step


def default_trial_length(key_bits: int, n: int) -> int:
    return (1 << (key_bits // 2)) + n


def _search(root: Key, n: int, hash: HashConfig, budget: int, rng: np.random.Generator, trial_length: int) -> ForgedChain:
    step = _stepper(hash)
    hashes = 0
    while hashes < budget:
        buf = deque(maxlen=n)
        cur = random_key(rng, hash)
        for _ in range(trial_length):
            if hashes >= budget:
                break
            buf.append(cur)
            cur = step(cur)
            hashes += 1
            if cur == root and len(buf) == n:
                # buf holds X_n..X_1, oldest first
                return ForgedChain(keys=(root,) + tuple(reversed(buf)), hashes=hashes)
    raise AttackExhausted(f"no pre-image chain found within {budget} hashes")


def _search_job(args) -> Optional[ForgedChain]:
    root, n, hash, budget, seed, trial_length = args
    try:
        return _search(root, n, hash, budget, np.random.default_rng(seed), trial_length)
    except AttackExhausted:
        return None


def bruteforce_attack(
    root: Key,
    n: int,
    hash: HashConfig,
    budget: int,
    rng: Union[int, np.random.Generator],
    trial_length: Optional[int] = None,
    workers: int = 1,
) -> ForgedChain:
    """
    Walk H from random seeds keeping the last n keys in a ring buffer until
    a walk lands on the root. Walks restart after trial_length hashes.
    Raises AttackExhausted when the budget runs out.
    """
    if n < 1:
        raise InvalidArgument("chain length must be >= 1")
    if budget < 0:
        raise InvalidArgument("budget must be >= 0")
    if len(root) != hash.key_bytes:
        raise InvalidArgument(f"root has {len(root)} octets, expected {hash.key_bytes}")
    trial_length = trial_length or default_trial_length(hash.key_bits, n)
    rng = np.random.default_rng(rng)
    if workers <= 1:
        return _search(root, n, hash, budget, rng, trial_length)

    # Split the budget; the lowest-numbered successful worker wins
    shares = [budget // workers + (1 if w < budget % workers else 0) for w in range(workers)]
    seeds = np.random.SeedSequence(int(rng.integers(0, 2**63))).spawn(workers)
    jobs = [(root, n, hash, share, seed, trial_length) for share, seed in zip(shares, seeds)]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        results = list(executor.map(_search_job, jobs))
    for found in results:
        if found is not None:
            return found
    raise AttackExhausted(f"no pre-image chain found within {budget} hashes")


def predicted_mtbf(hash_rate: Union[int, Fraction, str], key_bits: int) -> Fraction:
    """MTBF = 2^|K| / R_H in seconds, exact"""
    rate = Fraction(hash_rate)
    if rate <= 0:
        raise InvalidArgument("hash rate must be positive")
    if key_bits < 0:
        raise InvalidArgument("key_bits must be >= 0")
    return Fraction(1 << key_bits) / rate


def compromise_rate(hash_rate: Union[int, Fraction, str], key_bits: int) -> Fraction:
    """lambda_C = R_H / 2^|K|, compromised keychains per second"""
    return 1 / predicted_mtbf(hash_rate, key_bits)


def success_probability(budget: int, key_bits: int) -> float:
    """P_C for N_H = budget trials of success probability 2^-|K| each"""
    return float(-np.expm1(budget * np.log1p(-(2.0 ** -key_bits))))


# -------------------
# Campaigns
# -------------------

def _optional_fraction(value: Optional[Fraction]):
    return None if value is None else render_fraction(value)


@dataclass_json
@dataclass
class AttackStats:
    kind: str = ""
    lifetimes: int = 0
    attempts: int = 0
    successes: int = 0
    budget_per_lifetime: int = 0
    success_rate: float = 0.0
    predicted_success: float = 0.0
    time_to_compromise: Optional[float] = None
    observed_mtbf: Optional[float] = None
    predicted_mtbf: Optional[Fraction] = field(default=None, metadata=json_config(encoder=_optional_fraction))
    recoveries: int = 0
    false_negatives: int = 0


def lifetime_seconds(scenario: Scenario) -> Fraction:
    """T_C: one keychain period of the scenario's strategy at the mean frame interval"""
    return Fraction(scenario.strategy.period_frames * scenario.timing.period_us, 1_000_000)


def lifetime_budget(hash_rate: int, scenario: Scenario) -> int:
    return int(hash_rate * lifetime_seconds(scenario))


def observed_roots(scenario: Scenario, count: int) -> List[Key]:
    """Roots disclosed by the scenario's transmitter, in order, as an observer on the bus sees them"""
    tx, _ = init_transmitter(scenario.strategy, scenario.seed)
    roots: List[Key] = []
    while len(roots) < count:
        frame = tx.emit(b"")
        roots.extend(e.key for _, e in frame.present if e.i == 0 and not e.omega)
    return roots[:count]


def _campaign_job(args) -> Tuple[bool, int]:
    root, n, hash, budget, seed, trial_length = args
    try:
        found = _search(root, n, hash, budget, np.random.default_rng(seed), trial_length)
        return True, found.hashes
    except AttackExhausted:
        return False, budget


def run_attack_campaign(config, scenario: Scenario) -> AttackStats:
    if isinstance(config, BruteForceAttack):
        return _bruteforce_campaign(config, scenario)
    if isinstance(config, (MasqueradeAttack, DosSpamAttack)):
        return _injection_campaign(config, scenario)
    raise InvalidArgument(f"unknown adversary: {config!r}")


def _bruteforce_campaign(config: BruteForceAttack, scenario: Scenario) -> AttackStats:
    strategy = scenario.strategy
    hash = strategy.hash
    budget = lifetime_budget(config.hash_rate, scenario)
    trial_length = config.trial_length or default_trial_length(hash.key_bits, strategy.n)
    roots = observed_roots(scenario, config.trials)
    seeds = np.random.SeedSequence([scenario.seed, 0xB5]).spawn(len(roots))
    jobs = [(root, strategy.n, hash, budget, seed, trial_length) for root, seed in zip(roots, seeds)]
    logger.info(f"Brute-force campaign: {len(jobs)} lifetimes, {budget} hashes each, |K|={hash.key_bits}")

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            results = list(executor.map(_campaign_job, jobs))
    else:
        results = [_campaign_job(job) for job in jobs]

    successes = sum(1 for ok, _ in results if ok)
    attempts = sum(used for _, used in results)
    total_seconds = lifetime_seconds(scenario) * len(jobs)
    found_hashes = [used for ok, used in results if ok]
    logger.info(f"Brute-force campaign finished: {successes}/{len(jobs)} keychains compromised")
    return AttackStats(
        kind=config.kind,
        lifetimes=len(jobs),
        attempts=attempts,
        successes=successes,
        budget_per_lifetime=budget,
        success_rate=successes / len(jobs) if jobs else 0.0,
        predicted_success=success_probability(budget, hash.key_bits),
        time_to_compromise=(sum(found_hashes) / len(found_hashes) / config.hash_rate) if found_hashes else None,
        observed_mtbf=float(total_seconds / successes) if successes else None,
        predicted_mtbf=predicted_mtbf(config.hash_rate, hash.key_bits),
    )


def _injection_campaign(config, scenario: Scenario) -> AttackStats:
    from .channel import run

    metrics = run(scenario.model_copy(update={"adversary": config}))
    seconds = Fraction(metrics.duration_us, 1_000_000)
    return AttackStats(
        kind=config.kind,
        lifetimes=metrics.frames_sent // scenario.strategy.period_frames,
        attempts=metrics.forged_injected,
        successes=metrics.false_positives,
        success_rate=metrics.false_positives / metrics.forged_injected if metrics.forged_injected else 0.0,
        observed_mtbf=float(seconds / metrics.false_positives) if metrics.false_positives else None,
        recoveries=metrics.recoveries,
        false_negatives=metrics.false_negatives,
    )


# -------------------
# In-simulation attackers
# -------------------

class InjectingAdversary:
    """
    Masquerade or DoS attacker injecting forged frames between licit ones.
    It sees every licit frame on the bus and reuses the latest as template.
    """

    def __init__(self, config, sc_key: ScKey, hash: HashConfig, rng: np.random.Generator, period_us: int):
        self.config = config
        self.sc_key = sc_key
        self.hash = hash
        self.rng = rng
        rate = config.rate if isinstance(config, DosSpamAttack) else config.injection_rate
        self.interval_us = max(1, int(period_us / rate))
        self.template: Optional[UFrame] = None
        self.first: Optional[UFrame] = None

    def observe(self, frame: UFrame) -> List[bytes]:
        if self.first is None:
            self.first = frame
        self.template = frame
        return []

    def next_forgery(self) -> Optional[bytes]:
        if self.template is None:
            return None
        if isinstance(self.config, MasqueradeAttack) and self.config.key_guess == "replay":
            old = self.first
            g, entry = old.present[0]
            return forge_frame(
                self.sc_key, self.template, entry.key,
                slot=g, index=entry.i, counter=entry.c, message=b"replayed",
            )
        return forge_frame(self.sc_key, self.template, random_key(self.rng, self.hash))


class BruteForceAdversary:
    """Attacks every root disclosed on the bus and injects a forged frame right after the junction"""

    interval_us = None

    def __init__(self, config: BruteForceAttack, scenario: Scenario, sc_key: ScKey, rng: np.random.Generator):
        self.config = config
        self.sc_key = sc_key
        self.rng = rng
        self.n = scenario.strategy.n
        self.hash = scenario.strategy.hash
        self.budget = lifetime_budget(config.hash_rate, scenario)
        self.trial_length = config.trial_length or default_trial_length(self.hash.key_bits, self.n)
        self.successes = 0

    def observe(self, frame: UFrame) -> List[bytes]:
        forged = []
        for g, entry in frame.present:
            if entry.i != 0 or entry.omega:
                continue
            try:
                chain = _search(entry.key, self.n, self.hash, self.budget, self.rng, self.trial_length)
            except AttackExhausted:
                continue
            self.successes += 1
            logger.info(f"Brute force found a chain for root {entry.key.hex()} after {chain.hashes} hashes")
            forged.append(forge_frame(
                self.sc_key, frame, chain.seed,
                slot=g, index=self.n, counter=entry.c, message=b"masquerade",
            ))
        return forged

    def next_forgery(self) -> Optional[bytes]:
        return None


def make_adversary(config, scenario: Scenario, sc_key: ScKey, rng: np.random.Generator):
    if isinstance(config, BruteForceAttack):
        return BruteForceAdversary(config, scenario, sc_key, rng)
    return InjectingAdversary(config, sc_key, scenario.strategy.hash, rng, scenario.timing.period_us)
