"""Salted-hash audit commitments.

This is a commitment, not a zero-knowledge proof: verification works by
revealing the committed fields.  ``commitment = H(action ‖ state ‖ rule_id ‖ salt)``
with the digests fixed at 32 bytes and the salt at 16, so the concatenation
is unambiguous.  The DHT key is the first 20 bytes of ``H(commitment)``.

Binary layout::

    32B action_digest | 32B state_digest | u16 rule_len | rule_id (utf-8)
    | 16B salt | 32B commitment | 20B key
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

from ..core import RngStream

HASH_NAME = "sha256"
DIGEST_SIZE = 32
SALT_SIZE = 16
KEY_SIZE = 20


def digest(data: bytes) -> bytes:
    return hashlib.new(HASH_NAME, data).digest()


def dht_key(data: bytes) -> bytes:
    return digest(data)[:KEY_SIZE]


def make_salt(rng: RngStream) -> bytes:
    return rng.gen.bytes(SALT_SIZE)


def _commit(action_digest: bytes, state_digest: bytes, rule_id: str, salt: bytes) -> bytes:
    return digest(action_digest + state_digest + rule_id.encode("utf-8") + salt)


@dataclass(frozen=True)
class AuditRecord:
    action_digest: bytes
    state_digest: bytes
    rule_id: str
    salt: bytes
    commitment: bytes
    key: bytes

    def to_bytes(self) -> bytes:
        rule = self.rule_id.encode("utf-8")
        return (self.action_digest + self.state_digest + struct.pack("<H", len(rule)) + rule
                + self.salt + self.commitment + self.key)

    @classmethod
    def from_bytes(cls, data: bytes) -> "AuditRecord":
        off = 2 * DIGEST_SIZE
        if len(data) < off + 2:
            raise ValueError("truncated audit record")
        (rule_len,) = struct.unpack_from("<H", data, off)
        off += 2
        expected = off + rule_len + SALT_SIZE + DIGEST_SIZE + KEY_SIZE
        if len(data) != expected:
            raise ValueError("audit record length mismatch")
        rule = data[off:off + rule_len].decode("utf-8")
        off += rule_len
        salt = data[off:off + SALT_SIZE]
        off += SALT_SIZE
        commitment = data[off:off + DIGEST_SIZE]
        key = data[off + DIGEST_SIZE:]
        rec = cls(data[:DIGEST_SIZE], data[DIGEST_SIZE:2 * DIGEST_SIZE], rule, salt, commitment, key)
        if dht_key(commitment) != key:
            raise ValueError("audit record key does not match its commitment")
        return rec


def generate_proof(action_digest: bytes, state_digest: bytes, rule_id: str, salt: bytes) -> AuditRecord:
    if len(action_digest) != DIGEST_SIZE or len(state_digest) != DIGEST_SIZE:
        raise ValueError("digests must be 32 bytes")
    if len(salt) != SALT_SIZE:
        raise ValueError("salt must be 16 bytes")
    c = _commit(action_digest, state_digest, rule_id, salt)
    return AuditRecord(action_digest, state_digest, rule_id, salt, c, dht_key(c))


def verify_proof(record: AuditRecord, revealed: tuple[bytes, bytes, str, bytes]) -> bool:
    action_digest, state_digest, rule_id, salt = revealed
    return _commit(action_digest, state_digest, rule_id, salt) == record.commitment


def record_size(rule_id: str = "min-separation") -> int:
    return 2 * DIGEST_SIZE + 2 + len(rule_id.encode("utf-8")) + SALT_SIZE + DIGEST_SIZE + KEY_SIZE
