"""Stage one of password generation: input normalization and the two-level hash.

Everything in this module is a pure function of its arguments.  The inner
level stretches the long-term secret with many hash iterations; the outer
level hashes an unambiguous serialization of the stretched key together
with the site identity and the optional per-site inputs.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Callable, Optional
from urllib.parse import urlsplit

from .errors import InvalidParameter, InvalidSite

# Domain-separation tag; bumping it is a breaking change to every derived
# password, so it is versioned.
SERIALIZATION_TAG = b"autopass.v1"

DEFAULT_HASH_ID = "sha256"
DEFAULT_INNER_ITERATIONS = 100_000

_HASHES: dict[str, Callable[[], "hashlib._Hash"]] = {
    "sha256": hashlib.sha256,
    "sha3-256": hashlib.sha3_256,
}


def hash_function(hash_id: str = DEFAULT_HASH_ID):
    try:
        return _HASHES[hash_id]
    except KeyError:
        raise InvalidParameter(f"unknown hash function: {hash_id!r}") from None


def hash_bytes(data: bytes, hash_id: str = DEFAULT_HASH_ID) -> bytes:
    h = hash_function(hash_id)()
    h.update(data)
    return h.digest()


@dataclass(frozen=True)
class SiteKey:
    """Normalized site identifier.  `source` records how it was produced."""

    value: str
    source: str = "url"  # "url" | "user_site_name"

    def __post_init__(self) -> None:
        if self.source not in ("url", "user_site_name"):
            raise InvalidParameter(f"bad site key source: {self.source!r}")
        if not self.value or self.value != self.value.strip().lower():
            raise InvalidParameter(f"site key not normalized: {self.value!r}")


def normalize_site(raw: str, mode: str = "url", label_count: int = 2) -> SiteKey:
    """Reduce a raw site string to a stable SiteKey.

    In url mode the host is extracted, lowercased, stripped of one leading
    "www." and of any port, and truncated to its last `label_count`
    dot-separated labels, so e.g. login and marketing subdomains of one
    site map to the same key.  In user_site_name mode only trim+lowercase
    is applied.
    """
    if not raw or not raw.strip():
        raise InvalidSite("empty site string")
    if mode == "user_site_name":
        return SiteKey(raw.strip().lower(), source="user_site_name")
    if mode != "url":
        raise InvalidParameter(f"bad normalization mode: {mode!r}")

    text = raw.strip()
    # urlsplit only recognizes the host when a scheme or "//" prefix is present
    if "//" not in text:
        text = "//" + text
    try:
        host = urlsplit(text).hostname
    except ValueError as exc:
        raise InvalidSite(f"unparseable URL: {raw!r}") from exc
    if not host:
        raise InvalidSite(f"no host in URL: {raw!r}")
    host = host.strip(".").lower()
    if host.startswith("www.") and len(host) > 4:
        host = host[4:]
    if not host:
        raise InvalidSite(f"no host in URL: {raw!r}")
    if label_count >= 1:
        labels = host.split(".")
        host = ".".join(labels[-label_count:])
    return SiteKey(host, source="url")


def digest_object(content: bytes, hash_id: str = DEFAULT_HASH_ID) -> bytes:
    """32-byte digest of a user-selected digital object (file, text, ...)."""
    return hash_bytes(content, hash_id)


def stretch(secret: bytes, iterations: int, hash_id: str = DEFAULT_HASH_ID) -> bytes:
    """Inner level: apply the hash `iterations` times to slow brute force."""
    if iterations < 1:
        raise InvalidParameter("iterations must be >= 1")
    hfun = hash_function(hash_id)
    out = secret
    for _ in range(iterations):
        out = hfun(out).digest()
    return out


@dataclass(frozen=True)
class InputBundle:
    """All inputs to the outer hash.

    Optional fields that are absent serialize differently from
    present-but-empty ones, so every input combination is distinguishable.
    """

    stretched_key: bytes
    site_key: SiteKey
    user_constant: Optional[str] = None
    user_name: Optional[str] = None
    object_digest: Optional[bytes] = None
    version_nonce: int = 0

    def __post_init__(self) -> None:
        if len(self.stretched_key) != 32:
            raise InvalidParameter("stretched_key must be 32 bytes")
        if self.object_digest is not None and len(self.object_digest) != 32:
            raise InvalidParameter("object_digest must be 32 bytes")
        if self.version_nonce < 0:
            raise InvalidParameter("version_nonce must be non-negative")


def _field(present: bool, data: bytes) -> bytes:
    if not present:
        return b"\x00" + struct.pack(">I", 0)
    return b"\x01" + struct.pack(">I", len(data)) + data


def canonical_serialize(bundle: InputBundle) -> bytes:
    """Injective, length-prefixed serialization of a bundle.

    Layout: tag, then one [presence byte][u32 length][bytes] record per
    field in a fixed order.  Length prefixes remove any concatenation
    ambiguity between adjacent fields.
    """
    parts = [SERIALIZATION_TAG]
    parts.append(_field(True, bundle.stretched_key))
    parts.append(_field(True, bundle.site_key.value.encode("utf-8")))
    parts.append(
        _field(
            bundle.user_constant is not None,
            (bundle.user_constant or "").encode("utf-8"),
        )
    )
    parts.append(
        _field(bundle.user_name is not None, (bundle.user_name or "").encode("utf-8"))
    )
    parts.append(_field(bundle.object_digest is not None, bundle.object_digest or b""))
    parts.append(_field(True, struct.pack(">Q", bundle.version_nonce)))
    return b"".join(parts)


def derive_bits(bundle: InputBundle, hash_id: str = DEFAULT_HASH_ID) -> bytes:
    """Outer level: hash the canonical serialization into 32 bytes."""
    return hash_bytes(canonical_serialize(bundle), hash_id)
