"""Hash commitments that bind a registrant to a secret bit before the reveal.

A commitment is SHA-256 over a fixed 33-byte layout:

    1-byte bit (0x00 or 0x01)
    || 16-byte nonce
    || 8-byte big-endian participant number
    || 8-byte big-endian request id

The participant number and request id live inside the preimage, so a digest
cannot be replayed by another registrant or reused for another request. The
byte layout is a wire contract; golden vectors for it ship in
tests/data/commitment_vectors.json.
"""

from __future__ import annotations

import hashlib

NONCE_LENGTH = 16
DIGEST_LENGTH = 32
_U64 = 1 << 64


def encode_commitment_input(bit: int, nonce: bytes, participant: int, request_id: int) -> bytes:
    """Canonical 33-byte serialization of a commitment preimage."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    if not isinstance(nonce, (bytes, bytearray)) or len(nonce) != NONCE_LENGTH:
        raise ValueError(f"nonce must be exactly {NONCE_LENGTH} bytes")
    if not isinstance(participant, int) or not 0 <= participant < _U64:
        raise ValueError(f"participant must be a u64, got {participant!r}")
    if not isinstance(request_id, int) or not 0 <= request_id < _U64:
        raise ValueError(f"request id must be a u64, got {request_id!r}")
    return (
        bytes([bit])
        + bytes(nonce)
        + participant.to_bytes(8, "big")
        + request_id.to_bytes(8, "big")
    )


def commit(bit: int, nonce: bytes, participant: int, request_id: int) -> bytes:
    """SHA-256 digest of the canonical serialization. Deterministic."""
    return hashlib.sha256(encode_commitment_input(bit, nonce, participant, request_id)).digest()


def verify_reveal(bit: int, nonce: bytes, participant: int, request_id: int, digest: bytes) -> bool:
    """True iff the revealed preimage reproduces `digest`.

    Malformed input never raises; it simply fails the check, the same way an
    on-chain contract would ignore the call.
    """
    try:
        return commit(bit, nonce, participant, request_id) == bytes(digest)
    except (ValueError, TypeError):
        return False
