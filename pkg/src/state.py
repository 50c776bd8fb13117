# src/state.py
from dataclasses import dataclass
from typing import Dict, Iterable, List, Tuple

from .wire import AuthEntry


@dataclass(frozen=True)
class ChainState:
    """Receiver view of one keychain slot: <rho; c_hat, iota_hat, kappa_hat>"""
    rho: bool = False
    c_hat: int = 0
    iota_hat: int = 0
    kappa_hat: bytes = b""

    @classmethod
    def absent(cls) -> "ChainState":
        return cls()

    def to_dict(self) -> Dict:
        if not self.rho:
            return {"rho": False}
        return {"rho": True, "c": self.c_hat, "i": self.iota_hat, "key": self.kappa_hat.hex()}


@dataclass(frozen=True)
class CertifiedSnapshot:
    """Authentic per-slot state plus the freshness of the last frame it reflects"""
    slots: Tuple[ChainState, ...]
    freshness: int = 0

    def to_dict(self) -> Dict:
        return {"freshness": self.freshness, "slots": [s.to_dict() for s in self.slots]}


# Snapshot handed to receivers at SC initialization
InitSnapshot = CertifiedSnapshot


def apply_entries(slots: List[ChainState], entries: Iterable[AuthEntry]) -> None:
    """Copy every significant entry of an accepted frame into the slot table"""
    for g, entry in enumerate(entries):
        if not entry.tau:
            continue
        if entry.omega:
            slots[g] = ChainState.absent()
        else:
            slots[g] = ChainState(rho=True, c_hat=entry.c, iota_hat=entry.i, kappa_hat=entry.key)
