"""Ed25519-signed envelopes for everything the sync service hands out.

Clients hold a pinned copy of the service public key; a record is only
trusted if the signature over (key_id, timestamp, payload) verifies.
"""

from __future__ import annotations

import base64
import time
from dataclasses import dataclass
from typing import Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .errors import SignatureInvalid


def generate_keypair() -> tuple[bytes, bytes]:
    """Fresh Ed25519 keypair as (private_raw, public_raw), 32 bytes each."""
    priv = Ed25519PrivateKey.generate()
    return (
        priv.private_bytes_raw(),
        priv.public_key().public_bytes_raw(),
    )


def _signed_bytes(key_id: str, timestamp: int, payload: bytes) -> bytes:
    kid = key_id.encode("utf-8")
    return len(kid).to_bytes(4, "big") + kid + timestamp.to_bytes(8, "big") + payload


@dataclass(frozen=True)
class SignedEnvelope:
    payload: bytes
    key_id: str
    timestamp: int
    signature: bytes

    def to_json(self) -> dict:
        return {
            "payload": base64.b64encode(self.payload).decode("ascii"),
            "key_id": self.key_id,
            "timestamp": self.timestamp,
            "signature": base64.b64encode(self.signature).decode("ascii"),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SignedEnvelope":
        return cls(
            payload=base64.b64decode(obj["payload"]),
            key_id=obj["key_id"],
            timestamp=obj["timestamp"],
            signature=base64.b64decode(obj["signature"]),
        )


def sign_envelope(
    private_key: bytes, key_id: str, payload: bytes, timestamp: Optional[int] = None
) -> SignedEnvelope:
    if timestamp is None:
        timestamp = int(time.time())
    sig = Ed25519PrivateKey.from_private_bytes(private_key).sign(
        _signed_bytes(key_id, timestamp, payload)
    )
    return SignedEnvelope(payload=payload, key_id=key_id, timestamp=timestamp, signature=sig)


def verify_envelope(public_key: bytes, envelope: SignedEnvelope) -> bytes:
    """Return the payload iff the signature verifies; raise otherwise."""
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(
            envelope.signature,
            _signed_bytes(envelope.key_id, envelope.timestamp, envelope.payload),
        )
    except (InvalidSignature, ValueError):
        raise SignatureInvalid("envelope signature verification failed") from None
    return envelope.payload
