# tests/test_wire.py
import hashlib
import hmac
import json
from pathlib import Path

import numpy as np
import pytest

from src.errors import IntegrityFailure, InvalidArgument
from src.wire import (
    GOLDEN_SC_KEY,
    MAC_BYTES,
    AuthEntry,
    LinkInfo,
    UFrame,
    compute_mac,
    decode_frame,
    encode_frame,
    golden_vectors,
    seal,
)

GOLDEN = json.loads((Path(__file__).parent / "data" / "golden_frames.json").read_text())


def _frame(**overrides) -> UFrame:
    fields = dict(
        link_info=LinkInfo(sc_id=7, src_id=9),
        freshness=42,
        entries=(AuthEntry(tau=True, c=3, i=17, key=b"\xaa" * 16), AuthEntry.absent()),
        message=b"\x01\x02\x03",
    )
    fields.update(overrides)
    return UFrame(**fields)


class TestGoldenVectors:
    """Byte layout frozen against checked-in vectors."""

    @pytest.mark.parametrize("vector", GOLDEN["vectors"], ids=lambda v: v["name"])
    def test_body_is_frozen(self, vector):
        built = {v["name"]: v for v in golden_vectors()}[vector["name"]]
        assert built["body"] == vector["body"]

    @pytest.mark.parametrize("vector", GOLDEN["vectors"], ids=lambda v: v["name"])
    def test_mac_matches_independent_hmac(self, vector):
        key = bytes.fromhex(GOLDEN["sc_key"])
        body = bytes.fromhex(vector["body"])
        expected = hmac.new(key, body, hashlib.sha256).digest()[:16]
        built = {v["name"]: v for v in golden_vectors()}[vector["name"]]
        assert bytes.fromhex(built["mac"]) == expected
        assert built["encoded"] == vector["body"] + expected.hex()

    @pytest.mark.parametrize("vector", GOLDEN["vectors"], ids=lambda v: v["name"])
    def test_vectors_decode(self, vector):
        built = {v["name"]: v for v in golden_vectors()}[vector["name"]]
        decoded = decode_frame(bytes.fromhex(built["encoded"]), GOLDEN_SC_KEY, key_bytes=vector["key_bytes"])
        assert decoded == built["frame"]

    def test_omega_survives_decoding(self):
        built = {v["name"]: v for v in golden_vectors()}["j_frame"]
        decoded = decode_frame(bytes.fromhex(built["encoded"]), GOLDEN_SC_KEY)
        assert decoded.entries[0].omega is True
        assert decoded.entries[1].omega is False
        assert decoded.entries[1].i == 0


class TestCodecInversion:
    """Decoding inverts encoding over every slot layout."""

    @pytest.mark.parametrize("key_bytes", [2, 16])
    @pytest.mark.parametrize("g_count", range(1, 9))
    def test_every_tau_omega_layout(self, sc_key, g_count, key_bytes):
        rng = np.random.default_rng([g_count, key_bytes])
        for tau_bits in range(1 << g_count):
            present = [g for g in range(g_count) if tau_bits >> g & 1]
            for omega_bits in range(1 << len(present)):
                omega = {g for k, g in enumerate(present) if omega_bits >> k & 1}
                entries = tuple(
                    AuthEntry(
                        tau=True,
                        omega=g in omega,
                        c=int(rng.integers(0, 256)),
                        i=int(rng.integers(0, 1 << 16)),
                        key=rng.bytes(key_bytes),
                    )
                    if g in present else AuthEntry.absent()
                    for g in range(g_count)
                )
                frame = UFrame(
                    link_info=LinkInfo(sc_id=int(rng.integers(0, 1 << 16)), src_id=int(rng.integers(0, 1 << 16))),
                    freshness=int(rng.integers(0, 1 << 64, dtype=np.uint64)),
                    entries=entries,
                    message=rng.bytes(int(rng.integers(0, 300))),
                )
                assert decode_frame(encode_frame(frame, sc_key), sc_key, key_bytes=key_bytes) == frame


class TestEncodeDecode:
    """Codec behaviour on ordinary frames."""

    def test_decode_returns_equal_frame(self, sc_key):
        frame = _frame()
        decoded = decode_frame(encode_frame(frame, sc_key), sc_key)
        assert decoded == frame
        assert len(decoded.mac) == MAC_BYTES

    def test_seal_fills_mac(self, sc_key):
        frame = seal(_frame(), sc_key)
        assert frame.mac == encode_frame(_frame(), sc_key)[-MAC_BYTES:]

    def test_empty_message(self, sc_key):
        frame = _frame(message=b"")
        assert decode_frame(encode_frame(frame, sc_key), sc_key).message == b""

    def test_short_keys_need_key_bytes(self, sc_key):
        frame = _frame(entries=(AuthEntry(tau=True, c=0, i=1, key=b"\x12\x30"),))
        data = encode_frame(frame, sc_key)
        assert decode_frame(data, sc_key, key_bytes=2) == frame
        with pytest.raises(IntegrityFailure):
            decode_frame(data, sc_key)

    def test_mixed_key_widths_rejected(self, sc_key):
        entries = (AuthEntry(tau=True, i=1, key=b"\x00" * 16), AuthEntry(tau=True, i=2, key=b"\x00" * 8))
        with pytest.raises(InvalidArgument):
            encode_frame(_frame(entries=entries), sc_key)

    @pytest.mark.parametrize("overrides", [
        {"entries": ()},
        {"entries": (AuthEntry.absent(),) * 9},
        {"freshness": 1 << 64},
        {"entries": (AuthEntry(tau=True, c=256, i=1, key=bytes(16)),)},
        {"entries": (AuthEntry(tau=True, c=0, i=1 << 16, key=bytes(16)),)},
        {"message": b"\x00" * 0x10000},
        {"link_info": LinkInfo(sc_id=0x10000)},
    ])
    def test_out_of_range_fields(self, sc_key, overrides):
        with pytest.raises(InvalidArgument):
            encode_frame(_frame(**overrides), sc_key)

    def test_sc_key_length(self):
        with pytest.raises(InvalidArgument):
            compute_mac(b"short", b"data")


class TestIntegrity:
    """Every tampered or malformed input is an integrity failure."""

    def test_every_single_bit_flip_rejected(self, sc_key):
        data = encode_frame(_frame(message=b"x"), sc_key)
        for byte in range(len(data)):
            for bit in range(8):
                tampered = bytearray(data)
                tampered[byte] ^= 1 << bit
                with pytest.raises(IntegrityFailure):
                    decode_frame(bytes(tampered), sc_key)

    def test_every_prefix_rejected(self, sc_key):
        data = encode_frame(_frame(), sc_key)
        for length in range(len(data)):
            with pytest.raises(IntegrityFailure):
                decode_frame(data[:length], sc_key)

    def test_wrong_sc_key(self, sc_key):
        data = encode_frame(_frame(), sc_key)
        with pytest.raises(IntegrityFailure):
            decode_frame(data, bytes(16))

    def test_appended_bytes_rejected(self, sc_key):
        data = encode_frame(_frame(), sc_key)
        with pytest.raises(IntegrityFailure):
            decode_frame(data + b"\x00", sc_key)

    def test_well_formed_mac_over_bad_layout(self, sc_key):
        """Omega on an absent slot is refused even with a valid MAC."""
        body = bytearray(bytes.fromhex(GOLDEN["vectors"][2]["body"]))
        body[15] = 0x01
        data = bytes(body) + compute_mac(sc_key, bytes(body))
        with pytest.raises(IntegrityFailure):
            decode_frame(data, sc_key)

    def test_mac_depends_on_every_bit(self, sc_key):
        data = b"\x00" * 32
        tag = compute_mac(sc_key, data)
        for bit in range(0, 256, 17):
            flipped = bytearray(data)
            flipped[bit // 8] ^= 1 << (bit % 8)
            assert compute_mac(sc_key, bytes(flipped)) != tag
