# src/receiver.py
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

from .config import HashConfig, TimingConfig
from .errors import IntegrityFailure
from .keychain import Key, backtrack
from .state import CertifiedSnapshot, ChainState, apply_entries
from .transmitter import derive_dual_indices
from .wire import AuthEntry, ScKey, decode_frame

logger = logging.getLogger(__name__)


# -------------------
# Outcomes
# -------------------

@dataclass(frozen=True)
class Accepted:
    message: bytes
    freshness: int


@dataclass(frozen=True)
class RejectedIntegrity:
    pass


@dataclass(frozen=True)
class RejectedReplay:
    freshness: int


@dataclass(frozen=True)
class RejectedOrigin:
    freshness: int


@dataclass(frozen=True)
class DroppedRecoveryPending:
    pass


Outcome = Union[Accepted, RejectedIntegrity, RejectedReplay, RejectedOrigin, DroppedRecoveryPending]


@dataclass(frozen=True)
class RecoveryNeeded:
    """Raised by timer expiry; the receiver drops frames until recovery is applied"""
    at: int


class ReceiverState:
    """
    Unified receiver of one SC: per-slot chain state, replay counter and
    the origin-failure timeout. Times are integer microseconds.
    """

    def __init__(
        self,
        snapshot: CertifiedSnapshot,
        sc_key: ScKey,
        hash: HashConfig,
        timing: TimingConfig,
        backtrack_cap: Optional[int] = None,
        chain_n: Optional[int] = None,
    ):
        self.slots: List[ChainState] = list(snapshot.slots)
        self.last_freshness = snapshot.freshness
        self.sc_key = sc_key
        self.hash = hash
        self.timing = timing
        self.chain_n = chain_n
        self.backtrack_cap = backtrack_cap if backtrack_cap is not None else chain_n
        self.timeout: Optional[int] = None
        self.recovery_pending = False
        self.hash_calls = 0

    @property
    def slot_count(self) -> int:
        return len(self.slots)

    def timeout_duration(self) -> int:
        if self.timing.timeout_policy == "junction" and self.chain_n is not None:
            # (n - i + 1) T, from the furthest index known on a live slot
            live = [s.iota_hat for s in self.slots if s.rho]
            iota = max(live) if live else 0
            return max(1, self.chain_n - iota + 1) * self.timing.period_us
        return self.timing.effective_timeout_us


def init_receiver(
    snapshot: CertifiedSnapshot,
    sc_key: ScKey,
    hash: HashConfig,
    timing: Optional[TimingConfig] = None,
    backtrack_cap: Optional[int] = None,
    chain_n: Optional[int] = None,
) -> ReceiverState:
    return ReceiverState(snapshot, sc_key, hash, timing or TimingConfig(), backtrack_cap, chain_n)


# -------------------
# Validation
# -------------------

def _matches(rx: ReceiverState, state: ChainState, entry: AuthEntry) -> bool:
    d = entry.i - state.iota_hat
    if rx.backtrack_cap is not None and d > rx.backtrack_cap:
        return False
    rx.hash_calls += d
    return backtrack(entry.key, d, rx.hash) == state.kappa_hat


def validate(rx: ReceiverState, entries: Sequence[AuthEntry], ordered: bool = True) -> bool:
    """
    True iff some significant entry validates against a live slot: same
    counter, larger index, and hashing down to the stored key. Candidates
    are tried by ascending backtrack distance, lower g first on ties.
    """
    if len(entries) != rx.slot_count:
        return False
    candidates = []
    for g, (entry, state) in enumerate(zip(entries, rx.slots)):
        if not (entry.tau and state.rho):
            continue
        if entry.c != state.c_hat or entry.i <= state.iota_hat:
            continue
        if len(entry.key) != rx.hash.key_bytes:
            continue
        candidates.append((entry.i - state.iota_hat, g, entry, state))
    if ordered:
        candidates.sort(key=lambda item: (item[0], item[1]))
    return any(_matches(rx, state, entry) for _, _, entry, state in candidates)


def process(rx: ReceiverState, data: bytes, now: int) -> Outcome:
    if rx.recovery_pending:
        return DroppedRecoveryPending()
    try:
        frame = decode_frame(data, rx.sc_key, key_bytes=rx.hash.key_bytes)
    except IntegrityFailure:
        return RejectedIntegrity()
    if frame.freshness <= rx.last_freshness:
        return RejectedReplay(frame.freshness)
    if validate(rx, frame.entries):
        rx.last_freshness = frame.freshness
        rx.timeout = None
        apply_entries(rx.slots, frame.entries)
        return Accepted(frame.message, frame.freshness)
    if rx.timeout is None:
        rx.timeout = now + rx.timeout_duration()
        logger.debug(f"Origin check failed at {now}us, timeout armed for {rx.timeout}us")
    return RejectedOrigin(frame.freshness)


# -------------------
# Timer and recovery
# -------------------

def on_timer_expiry(rx: ReceiverState, now: int) -> Optional[RecoveryNeeded]:
    if rx.timeout is None or now < rx.timeout or rx.recovery_pending:
        return None
    rx.timeout = None
    rx.recovery_pending = True
    logger.info(f"Timeout expired at {now}us, SC recovery needed")
    return RecoveryNeeded(at=now)


def apply_recovery(rx: ReceiverState, snap: CertifiedSnapshot) -> None:
    rx.slots = list(snap.slots)
    rx.timeout = None
    rx.recovery_pending = False
    rx.last_freshness = snap.freshness


# -------------------
# Reference validators
# -------------------

def validate_single_ref(state: Optional[ChainState], c: int, i: int, key: Key, hash: HashConfig) -> bool:
    """Single-chain check, evaluated left to right: c == c_hat, i > iota_hat, H^(i-iota_hat)(K) == kappa_hat"""
    if state is None or not state.rho:
        return False
    return c == state.c_hat and i > state.iota_hat and backtrack(key, i - state.iota_hat, hash) == state.kappa_hat


def validate_dual_ref(
    state_a: Optional[ChainState],
    state_b: Optional[ChainState],
    c_a: int,
    i_a: int,
    key_a: Key,
    key_b: Key,
    half: int,
    hash: HashConfig,
    j_keys: int = 3,
) -> bool:
    """Chain a first, then chain b with its index and counter derived from a's"""
    i_b, c_b = derive_dual_indices(i_a, c_a, half, j_keys)
    return validate_single_ref(state_a, c_a, i_a, key_a, hash) or validate_single_ref(state_b, c_b, i_b, key_b, hash)
