# src/transmitter.py
import logging
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Tuple, Union

import numpy as np

from .config import (
    COUNTER_MODULUS,
    BasicStrategy,
    DualFullStrategy,
    DualSparseStrategy,
    OverlappedStrategy,
    dual_geometry,
    parse_strategy,
    strategy_label,
)
from .errors import InvalidArgument
from .keychain import Keychain, derive_chain, random_key
from .state import CertifiedSnapshot, ChainState, InitSnapshot, apply_entries
from .wire import MAX_MESSAGE, AuthEntry, LinkInfo, UFrame

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.SeedSequence, np.random.Generator]


class FrameKind(str, Enum):
    A = "A"
    D = "D"
    J = "J"


def classify_frame(frame: UFrame) -> FrameKind:
    """A: one key, D: keys of two chains, J: a chain is terminated"""
    present = frame.present
    if any(e.omega for _, e in present):
        return FrameKind.J
    return FrameKind.D if len(present) > 1 else FrameKind.A


class Transmitter:
    """
    Transmitter state of one SC: active chains, the precomputed next chain
    and the per-slot view a recovering receiver must be given.
    """

    def __init__(self, config, rng: np.random.Generator, link: LinkInfo):
        self.config = config
        self.hash = config.hash
        self.rng = rng
        self.link = link
        self.freshness = 0
        self.frames_sent = 0
        self.keys_sent = 0
        self.disclosed: List[ChainState] = [ChainState.absent()] * config.slot_count
        self.pending: Optional[Keychain] = None

    @property
    def slot_count(self) -> int:
        return self.config.slot_count

    def _new_chain(self) -> Keychain:
        return derive_chain(random_key(self.rng, self.hash), self.config.n, self.hash)

    def _take_pending(self) -> Keychain:
        chain = self.pending
        self.pending = self._new_chain()
        return chain

    def snapshot(self) -> CertifiedSnapshot:
        return CertifiedSnapshot(slots=tuple(self.disclosed), freshness=self.freshness)

    def _next_entries(self) -> List[AuthEntry]:
        raise NotImplementedError

    def emit(self, message: bytes) -> UFrame:
        if len(message) > MAX_MESSAGE:
            raise InvalidArgument(f"message of {len(message)} octets exceeds {MAX_MESSAGE}")
        entries = self._next_entries()
        self.freshness += 1
        frame = UFrame(link_info=self.link, freshness=self.freshness, entries=tuple(entries), message=bytes(message))
        apply_entries(self.disclosed, frame.entries)
        self.frames_sent += 1
        self.keys_sent += len(frame.present)
        return frame


TxState = Transmitter


class SingleChainTransmitter(Transmitter):
    """
    Basic and overlapped strategies (G = 2).

    A chain discloses K_Q..K_{n-Q} in A-frames, then Q J-frames pair
    K_{n-Q+1+k} (omega set) with K'_k of the next chain in the other slot.
    """

    def __init__(self, config, rng: np.random.Generator, link: LinkInfo):
        super().__init__(config, rng, link)
        self.q = config.q
        self.current = self._new_chain()
        self.pending = self._new_chain()
        self.c = 0
        self.slot = 1
        self.next_index = self.q
        self.disclosed[0] = ChainState(rho=True, c_hat=0, iota_hat=0, kappa_hat=self.current.root)

    def _next_entries(self) -> List[AuthEntry]:
        n = self.config.n
        entries = [AuthEntry.absent()] * 2
        i = self.next_index
        if i <= n - self.q:
            entries[self.slot - 1] = AuthEntry(tau=True, c=self.c, i=i, key=self.current.keys[i])
            self.next_index += 1
            return entries

        k = i - (n - self.q + 1)
        new_c = (self.c + 1) % COUNTER_MODULUS
        other = 2 if self.slot == 1 else 1
        entries[self.slot - 1] = AuthEntry(tau=True, omega=True, c=self.c, i=i, key=self.current.keys[i])
        entries[other - 1] = AuthEntry(tau=True, c=new_c, i=k, key=self.pending.keys[k])
        self.next_index += 1
        if k == self.q - 1:
            logger.debug(f"Junction done: counter {self.c} -> {new_c}, slot {self.slot} -> {other}")
            self.current = self._take_pending()
            self.c = new_c
            self.slot = other
            self.next_index = self.q
        return entries


class _Active:
    __slots__ = ("chain", "c", "slot")

    def __init__(self, chain: Keychain, c: int, slot: int):
        self.chain = chain
        self.c = c
        self.slot = slot


class DualChainTransmitter(Transmitter):
    """
    Dual-full and sparse strategies (G = 3).

    Each half lasts H frames. The settled chain discloses K_{n-H+q} at half
    position q; the start-up chain discloses K_{q/m} whenever m divides q.
    The last frame of a half is the J-frame: the settled chain's K_n with
    omega, the next chain's root in the free slot and, for 3-key
    junctions, the start-up chain's key. The start-up chain then settles.
    """

    def __init__(self, config, rng: np.random.Generator, link: LinkInfo):
        super().__init__(config, rng, link)
        self.half_length, self.spacing, self.startup_in_junction = dual_geometry(config)
        self.settled_start = config.n - self.half_length
        self.startup = _Active(self._new_chain(), 0, 1)
        self.settled = _Active(self._new_chain(), 0, 2)
        self.pending = self._new_chain()
        self.free_slot = 3
        self.position = 1
        self.pair = [1, 2]
        self.disclosed[0] = ChainState(rho=True, c_hat=0, iota_hat=0, kappa_hat=self.startup.chain.root)
        self.disclosed[1] = ChainState(
            rho=True, c_hat=0, iota_hat=self.settled_start,
            kappa_hat=self.settled.chain.keys[self.settled_start],
        )

    @property
    def slot_pair(self) -> Tuple[int, int]:
        return self.pair[0], self.pair[1]

    def _next_entries(self) -> List[AuthEntry]:
        q = self.position
        junction = q == self.half_length
        entries = [AuthEntry.absent()] * 3

        s = self.settled
        i_s = self.settled_start + q
        entries[s.slot - 1] = AuthEntry(tau=True, omega=junction, c=s.c, i=i_s, key=s.chain.keys[i_s])

        u = self.startup
        if q % self.spacing == 0 and (not junction or self.startup_in_junction):
            i_u = q // self.spacing
            entries[u.slot - 1] = AuthEntry(tau=True, c=u.c, i=i_u, key=u.chain.keys[i_u])

        if not junction:
            self.position += 1
            return entries

        new_c = (s.c + 1) % COUNTER_MODULUS
        entries[self.free_slot - 1] = AuthEntry(tau=True, c=new_c, i=0, key=self.pending.root)
        logger.debug(f"Junction: slot {s.slot} retired, counter {new_c} starts in slot {self.free_slot}")
        self.pair[self.pair.index(s.slot)] = self.free_slot
        new = _Active(self._take_pending(), new_c, self.free_slot)
        self.free_slot = s.slot
        self.settled = u
        self.startup = new
        self.position = 1
        return entries


# -------------------
# Module-level operations
# -------------------

def init_transmitter(config, seed: Seed, link: Optional[LinkInfo] = None) -> Tuple[Transmitter, InitSnapshot]:
    config = parse_strategy(config)
    rng = np.random.default_rng(seed)
    link = link or LinkInfo()
    if isinstance(config, (BasicStrategy, OverlappedStrategy)):
        tx = SingleChainTransmitter(config, rng, link)
    else:
        tx = DualChainTransmitter(config, rng, link)
    logger.info(f"Transmitter initialized: {strategy_label(config)}")
    return tx, tx.snapshot()


def emit(tx: Transmitter, message: bytes) -> UFrame:
    return tx.emit(message)


def handle_recovery_request(tx: Transmitter) -> CertifiedSnapshot:
    """Latest disclosed <c, i, K> of every live slot, with rho set"""
    snapshot = tx.snapshot()
    logger.info(f"Recovery snapshot issued at freshness {snapshot.freshness}")
    return snapshot


def theoretical_efficiency(config) -> Fraction:
    """Closed-form key transmission efficiency (frames per key sent)"""
    config = parse_strategy(config)
    if isinstance(config, BasicStrategy):
        return Fraction(config.n, config.n + 1)
    if isinstance(config, OverlappedStrategy):
        return Fraction(config.n - config.q + 1, config.n + 1)
    if isinstance(config, DualFullStrategy):
        # A 3-key junction adds one key per half
        if config.j_keys == 3:
            return Fraction(config.half, 2 * config.half + 1)
        return Fraction(1, 2)
    if isinstance(config, DualSparseStrategy):
        return Fraction(config.m, config.m + 1)
    raise InvalidArgument(f"unknown strategy: {config!r}")


def period_frames(config) -> int:
    return parse_strategy(config).period_frames


def keys_per_period(config) -> int:
    return parse_strategy(config).keys_per_period


def derive_dual_indices(i_a: int, c_a: int, half: int, j_keys: int = 3) -> Tuple[int, int]:
    """
    Index and counter of chain b given chain a's entry in the same frame.

    With 3-key junctions chains are 2N long and offset by N; with 2-key
    junctions they are 2N-1 long and offset by N-1.
    """
    if j_keys not in (2, 3):
        raise InvalidArgument(f"j_keys must be 2 or 3, got {j_keys}")
    offset = half if j_keys == 3 else half - 1
    n = 2 * half if j_keys == 3 else 2 * half - 1
    if not 1 <= i_a <= n:
        raise InvalidArgument(f"i_a={i_a} outside [1, {n}]")
    if i_a <= offset:
        return i_a + offset, c_a
    return i_a - offset, (c_a + 1) % COUNTER_MODULUS
