# src/keychain.py
import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np

from .config import HashConfig
from .errors import BudgetExceeded, InvalidArgument

Key = bytes


@lru_cache(maxsize=None)
def hash_constructor(algorithm: str) -> Callable:
    # Named constructor when hashlib exposes one
    return getattr(hashlib, algorithm, None) or (lambda data: hashlib.new(algorithm, data))


def _check_key(k: Key, hash: HashConfig) -> None:
    if len(k) != hash.key_bytes:
        raise InvalidArgument(f"key has {len(k)} octets, expected {hash.key_bytes}")


def truncate(digest: bytes, hash: HashConfig) -> Key:
    """Keep the leading key_bits bits of a digest, zeroing the tail of the last octet"""
    out = digest[: hash.key_bytes]
    mask = hash.tail_mask
    if mask != 0xFF:
        out = out[:-1] + bytes([out[-1] & mask])
    return out


def hash_step(k: Key, hash: HashConfig) -> Key:
    """One application of the truncated hash H"""
    _check_key(k, hash)
    return truncate(hash_constructor(hash.algorithm)(k).digest(), hash)


def backtrack(k: Key, d: int, hash: HashConfig, cap: Optional[int] = None) -> Key:
    """Apply H d times. A d above cap raises BudgetExceeded."""
    if d < 0:
        raise InvalidArgument(f"backtrack distance must be >= 0, got {d}")
    if cap is not None and d > cap:
        raise BudgetExceeded(f"{d} hash steps requested, cap is {cap}")
    _check_key(k, hash)
    h = hash_constructor(hash.algorithm)
    for _ in range(d):
        k = truncate(h(k).digest(), hash)
    return k


@dataclass(frozen=True)
class Keychain:
    """Keys K_0..K_n with K_{i-1} = H(K_i); the seed is K_n"""
    seed: Key
    n: int
    keys: Tuple[Key, ...]
    hash: HashConfig

    @property
    def root(self) -> Key:
        return self.keys[0]

    def key_at(self, i: int) -> Key:
        if not 0 <= i <= self.n:
            raise InvalidArgument(f"index {i} outside [0, {self.n}]")
        return self.keys[i]


def derive_chain(seed: Key, n: int, hash: HashConfig) -> Keychain:
    if n < 0:
        raise InvalidArgument(f"chain length must be >= 0, got {n}")
    _check_key(seed, hash)
    h = hash_constructor(hash.algorithm)
    keys = [seed]
    for _ in range(n):
        keys.append(truncate(h(keys[-1]).digest(), hash))
    keys.reverse()
    return Keychain(seed=seed, n=n, keys=tuple(keys), hash=hash)


def key_at(chain: Keychain, i: int) -> Key:
    return chain.key_at(i)


def random_key(rng: np.random.Generator, hash: HashConfig) -> Key:
    """Fresh key drawn from a seeded generator, masked like a hash output"""
    return truncate(rng.bytes(hash.key_bytes), hash)
