# src/wire.py
"""
U-frame codec and the link-layer integrity check.

Layout (big-endian):

    version(1)=0x01 | sc_id(2) | src_id(2) | freshness(8) | G(1)
    | tau bitmap(1) | omega bitmap(1)
    | for each present slot g, ascending: c(1) | i(2) | key
    | msg_len(2) | message | mac(16)

The MAC is HMAC-SHA256 keyed with K_SC over everything before it,
truncated to 16 octets.
"""
import hashlib
import hmac
import struct
from dataclasses import dataclass, field, replace
from typing import Dict, List, Tuple

from .config import HashConfig
from .errors import IntegrityFailure, InvalidArgument

VERSION = 0x01
MAC_BYTES = 16
SC_KEY_BYTES = 16
MAX_SLOTS = 8
MAX_MESSAGE = 0xFFFF

_HEADER = struct.Struct(">BHHQBBB")
_ENTRY = struct.Struct(">BH")
_LEN = struct.Struct(">H")

ScKey = bytes


@dataclass(frozen=True)
class AuthEntry:
    """One keychain slot of a frame: <tau, omega, c, i, K>"""
    tau: bool = False
    omega: bool = False
    c: int = 0
    i: int = 0
    key: bytes = b""

    @classmethod
    def absent(cls) -> "AuthEntry":
        return cls()


@dataclass(frozen=True)
class LinkInfo:
    sc_id: int = 1
    src_id: int = 1


@dataclass(frozen=True)
class UFrame:
    link_info: LinkInfo
    freshness: int
    entries: Tuple[AuthEntry, ...]
    message: bytes = b""
    mac: bytes = field(default=b"", compare=False)

    @property
    def present(self) -> List[Tuple[int, AuthEntry]]:
        """(g, entry) pairs with tau set, g counted from 1"""
        return [(g, e) for g, e in enumerate(self.entries, start=1) if e.tau]


def compute_mac(sc_key: ScKey, data: bytes) -> bytes:
    if len(sc_key) != SC_KEY_BYTES:
        raise InvalidArgument(f"SC key must be {SC_KEY_BYTES} octets")
    return hmac.new(sc_key, data, hashlib.sha256).digest()[:MAC_BYTES]


def _encode_body(frame: UFrame) -> bytes:
    g_count = len(frame.entries)
    if not 1 <= g_count <= MAX_SLOTS:
        raise InvalidArgument(f"G must be in [1, {MAX_SLOTS}], got {g_count}")
    if len(frame.message) > MAX_MESSAGE:
        raise InvalidArgument(f"message of {len(frame.message)} octets exceeds {MAX_MESSAGE}")
    if not 0 <= frame.freshness < 1 << 64:
        raise InvalidArgument("freshness must fit in 64 bits")
    link = frame.link_info
    if not (0 <= link.sc_id <= 0xFFFF and 0 <= link.src_id <= 0xFFFF):
        raise InvalidArgument("sc_id and src_id are 16-bit")

    tau_bits = 0
    omega_bits = 0
    slots = []
    key_len = None
    for g, entry in enumerate(frame.entries):
        if not entry.tau:
            continue
        if not 0 <= entry.c <= 0xFF or not 0 <= entry.i <= 0xFFFF:
            raise InvalidArgument(f"slot {g + 1}: c or i out of range")
        if key_len is None:
            key_len = len(entry.key)
        elif len(entry.key) != key_len:
            raise InvalidArgument("all keys in one frame must have the same width")
        tau_bits |= 1 << g
        if entry.omega:
            omega_bits |= 1 << g
        slots.append(_ENTRY.pack(entry.c, entry.i) + entry.key)

    parts = [_HEADER.pack(VERSION, link.sc_id, link.src_id, frame.freshness, g_count, tau_bits, omega_bits)]
    parts.extend(slots)
    parts.append(_LEN.pack(len(frame.message)))
    parts.append(frame.message)
    return b"".join(parts)


def encode_frame(frame: UFrame, sc_key: ScKey) -> bytes:
    body = _encode_body(frame)
    return body + compute_mac(sc_key, body)


def seal(frame: UFrame, sc_key: ScKey) -> UFrame:
    """Frame with its mac field filled in"""
    return replace(frame, mac=compute_mac(sc_key, _encode_body(frame)))


def decode_frame(data: bytes, sc_key: ScKey, *, key_bytes: int = HashConfig().key_bytes) -> UFrame:
    """Parse and authenticate; every failure is an IntegrityFailure"""
    try:
        return _decode(bytes(data), sc_key, key_bytes)
    except IntegrityFailure:
        raise
    except (struct.error, ValueError, IndexError) as e:
        raise IntegrityFailure("frame rejected") from e


def _decode(data: bytes, sc_key: ScKey, key_bytes: int) -> UFrame:
    if len(data) < _HEADER.size + _LEN.size + MAC_BYTES:
        raise IntegrityFailure("frame rejected")
    body, tag = data[:-MAC_BYTES], data[-MAC_BYTES:]
    if not hmac.compare_digest(compute_mac(sc_key, body), tag):
        raise IntegrityFailure("frame rejected")

    version, sc_id, src_id, freshness, g_count, tau_bits, omega_bits = _HEADER.unpack_from(body, 0)
    if version != VERSION or not 1 <= g_count <= MAX_SLOTS:
        raise IntegrityFailure("frame rejected")
    if tau_bits >> g_count or omega_bits & ~tau_bits:
        raise IntegrityFailure("frame rejected")

    offset = _HEADER.size
    entries = []
    for g in range(g_count):
        if not tau_bits & (1 << g):
            entries.append(AuthEntry.absent())
            continue
        c, i = _ENTRY.unpack_from(body, offset)
        offset += _ENTRY.size
        key = body[offset: offset + key_bytes]
        if len(key) != key_bytes:
            raise IntegrityFailure("frame rejected")
        offset += key_bytes
        entries.append(AuthEntry(tau=True, omega=bool(omega_bits & (1 << g)), c=c, i=i, key=key))

    (msg_len,) = _LEN.unpack_from(body, offset)
    offset += _LEN.size
    if offset + msg_len != len(body):
        raise IntegrityFailure("frame rejected")
    message = body[offset:]

    return UFrame(
        link_info=LinkInfo(sc_id=sc_id, src_id=src_id),
        freshness=freshness,
        entries=tuple(entries),
        message=message,
        mac=tag,
    )


# -------------------
# Golden vectors
# -------------------

GOLDEN_SC_KEY = bytes(range(SC_KEY_BYTES))


def golden_vectors() -> List[Dict]:
    """Reference frames whose encodings are frozen in tests/data/golden_frames.json"""
    absent = AuthEntry.absent()
    cases = [
        ("a_frame", 16, UFrame(
            link_info=LinkInfo(sc_id=0x0001, src_id=0x0002),
            freshness=1,
            entries=(AuthEntry(tau=True, c=0, i=1, key=b"\x11" * 16), absent),
            message=b"hi",
        )),
        ("j_frame", 16, UFrame(
            link_info=LinkInfo(sc_id=0x0001, src_id=0x0002),
            freshness=3,
            entries=(
                AuthEntry(tau=True, omega=True, c=0, i=3, key=b"\x33" * 16),
                AuthEntry(tau=True, c=1, i=0, key=b"\x44" * 16),
            ),
            message=b"",
        )),
        ("no_entries", 16, UFrame(
            link_info=LinkInfo(sc_id=0xBEEF, src_id=0x0102),
            freshness=(1 << 64) - 1,
            entries=(absent, absent, absent),
            message=b"ping",
        )),
        ("dual_three_key", 2, UFrame(
            link_info=LinkInfo(sc_id=0x0001, src_id=0x0001),
            freshness=16,
            entries=(
                AuthEntry(tau=True, c=5, i=4, key=bytes.fromhex("abcd")),
                AuthEntry(tau=True, omega=True, c=5, i=8, key=bytes.fromhex("1234")),
                AuthEntry(tau=True, c=6, i=0, key=bytes.fromhex("beef")),
            ),
            message=b"x",
        )),
    ]
    vectors = []
    for name, key_bytes, frame in cases:
        encoded = encode_frame(frame, GOLDEN_SC_KEY)
        vectors.append({
            "name": name,
            "key_bytes": key_bytes,
            "sc_key": GOLDEN_SC_KEY.hex(),
            "frame": frame,
            "body": encoded[:-MAC_BYTES].hex(),
            "mac": encoded[-MAC_BYTES:].hex(),
            "encoded": encoded.hex(),
        })
    return vectors


def frame_to_dict(frame: UFrame) -> Dict:
    return {
        "sc_id": frame.link_info.sc_id,
        "src_id": frame.link_info.src_id,
        "freshness": frame.freshness,
        "entries": [
            {"tau": e.tau, "omega": e.omega, "c": e.c, "i": e.i, "key": e.key.hex()} if e.tau else {"tau": False}
            for e in frame.entries
        ],
        "message": frame.message.hex(),
    }
