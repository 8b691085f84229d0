"""Encrypted local store of global and site-specific configuration.

The master secret is 32 random bytes generated at init and kept encrypted
under an AEAD key derived from the user password.  Site entries carry the
policy, the optional password offset, the input-parameter flags and an
optional reminder.  `generate_password` runs the full pipeline end to end.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import random
import secrets
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from . import derivation, policy as policy_mod
from .derivation import DEFAULT_HASH_ID, DEFAULT_INNER_ITERATIONS, InputBundle, SiteKey
from .errors import (
    AuthenticationFailed,
    InvariantViolation,
    MissingObject,
    NotFound,
    VaultCorrupt,
    VaultExists,
)
from .policy import PasswordOffset, PasswordPolicy

VAULT_MAGIC = "autopass-vault"
FORMAT_VERSION = 1
DEFAULT_KDF_ITERATIONS = 100_000

DEFAULT_POLICY = PasswordPolicy(
    length_min=12,
    length_max=12,
    allowed_classes=frozenset({"lower", "upper", "digit", "symbol"}),
    required_classes=frozenset({"lower", "digit"}),
)


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


@dataclass
class GlobalConfig:
    kdf_salt: bytes
    kdf_iterations: int
    aead_nonce: bytes
    encrypted_master: bytes
    user_constant: str = ""
    hash_id: str = DEFAULT_HASH_ID
    inner_iterations: int = DEFAULT_INNER_ITERATIONS
    kdf_id: str = "pbkdf2-sha256"
    aead_id: str = "aes-256-gcm"
    format_version: int = FORMAT_VERSION

    def to_json(self) -> dict:
        return {
            "kdf_salt": _b64(self.kdf_salt),
            "kdf_iterations": self.kdf_iterations,
            "aead_nonce": _b64(self.aead_nonce),
            "encrypted_master": _b64(self.encrypted_master),
            "user_constant": self.user_constant,
            "hash_id": self.hash_id,
            "inner_iterations": self.inner_iterations,
            "kdf_id": self.kdf_id,
            "aead_id": self.aead_id,
            "format_version": self.format_version,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GlobalConfig":
        return cls(
            kdf_salt=_unb64(obj["kdf_salt"]),
            kdf_iterations=obj["kdf_iterations"],
            aead_nonce=_unb64(obj["aead_nonce"]),
            encrypted_master=_unb64(obj["encrypted_master"]),
            user_constant=obj.get("user_constant", ""),
            hash_id=obj.get("hash_id", DEFAULT_HASH_ID),
            inner_iterations=obj.get("inner_iterations", DEFAULT_INNER_ITERATIONS),
            kdf_id=obj.get("kdf_id", "pbkdf2-sha256"),
            aead_id=obj.get("aead_id", "aes-256-gcm"),
            format_version=obj.get("format_version", FORMAT_VERSION),
        )


@dataclass
class SiteConfig:
    site_key: str
    policy: PasswordPolicy = DEFAULT_POLICY
    offset: Optional[PasswordOffset] = None
    use_user_constant: bool = False
    use_user_name: bool = False
    use_object: bool = False
    user_name: Optional[str] = None
    reminder: Optional[str] = None
    site_source: str = "url"
    version: int = 0
    updated_at: float = 0.0

    def validate(self) -> None:
        if self.use_user_name and self.user_name is None:
            raise InvariantViolation("use_user_name set but no user_name stored")
        if self.offset is not None:
            charset = policy_mod.effective_charset(self.policy)
            if self.offset.modulus != len(charset):
                raise InvariantViolation("offset modulus != policy charset size")
            if len(self.offset.shifts) != self.policy.length_min:
                raise InvariantViolation("offset length != policy password length")

    def to_json(self) -> dict:
        return {
            "site_key": self.site_key,
            "policy": self.policy.to_json(),
            "offset": self.offset.to_json() if self.offset else None,
            "input_params": {
                "use_user_constant": self.use_user_constant,
                "use_user_name": self.use_user_name,
                "use_object": self.use_object,
                "user_name": self.user_name,
            },
            "reminder": self.reminder,
            "site_source": self.site_source,
            "version": self.version,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SiteConfig":
        params = obj.get("input_params", {})
        return cls(
            site_key=obj["site_key"],
            policy=PasswordPolicy.from_json(obj["policy"]),
            offset=PasswordOffset.from_json(obj["offset"]) if obj.get("offset") else None,
            use_user_constant=params.get("use_user_constant", False),
            use_user_name=params.get("use_user_name", False),
            use_object=params.get("use_object", False),
            user_name=params.get("user_name"),
            reminder=obj.get("reminder"),
            site_source=obj.get("site_source", "url"),
            version=obj.get("version", 0),
            updated_at=obj.get("updated_at", 0.0),
        )


@dataclass
class Vault:
    global_config: GlobalConfig
    sites: dict = field(default_factory=dict)  # site_key -> SiteConfig
    policy_cache: dict = field(default_factory=dict)  # domain -> envelope json dict
    sync_user_id: Optional[str] = None
    sync_record_version: int = 0

    def to_json(self) -> dict:
        return {
            "magic": VAULT_MAGIC,
            "format_version": self.global_config.format_version,
            "global": self.global_config.to_json(),
            "sites": {k: v.to_json() for k, v in sorted(self.sites.items())},
            "policy_cache": self.policy_cache,
            "sync": {
                "user_id": self.sync_user_id,
                "record_version": self.sync_record_version,
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Vault":
        if obj.get("magic") != VAULT_MAGIC:
            raise VaultCorrupt("missing vault magic header")
        sync = obj.get("sync", {})
        return cls(
            global_config=GlobalConfig.from_json(obj["global"]),
            sites={k: SiteConfig.from_json(v) for k, v in obj.get("sites", {}).items()},
            policy_cache=obj.get("policy_cache", {}),
            sync_user_id=sync.get("user_id"),
            sync_record_version=sync.get("record_version", 0),
        )


def _kdf(user_password: str, salt: bytes, iterations: int) -> bytes:
    return hashlib.pbkdf2_hmac(
        "sha256", user_password.encode("utf-8"), salt, iterations, dklen=32
    )


def init_vault(
    user_password: str,
    kdf_iterations: int = DEFAULT_KDF_ITERATIONS,
    inner_iterations: int = DEFAULT_INNER_ITERATIONS,
    user_constant: str = "",
    hash_id: str = DEFAULT_HASH_ID,
    rand: Callable[[int], bytes] = secrets.token_bytes,
) -> Vault:
    """Create a fresh vault: random master secret, AEAD-encrypted at rest."""
    if not user_password:
        raise AuthenticationFailed("user password must be non-empty")
    master = rand(32)
    salt = rand(16)
    nonce = rand(12)
    key = _kdf(user_password, salt, kdf_iterations)
    ciphertext = AESGCM(key).encrypt(nonce, master, VAULT_MAGIC.encode())
    return Vault(
        global_config=GlobalConfig(
            kdf_salt=salt,
            kdf_iterations=kdf_iterations,
            aead_nonce=nonce,
            encrypted_master=ciphertext,
            user_constant=user_constant,
            hash_id=hash_id,
            inner_iterations=inner_iterations,
        )
    )


def unlock(vault: Vault, user_password: str) -> bytes:
    """Decrypt the master secret; wrong password and tampering look the same."""
    g = vault.global_config
    key = _kdf(user_password, g.kdf_salt, g.kdf_iterations)
    try:
        master = AESGCM(key).decrypt(g.aead_nonce, g.encrypted_master, VAULT_MAGIC.encode())
    except InvalidTag:
        raise AuthenticationFailed("vault unlock failed") from None
    if len(master) != 32:
        raise VaultCorrupt("master secret has wrong length")
    return master


def save(vault: Vault, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(vault.to_json(), indent=2, sort_keys=True))
    os.replace(tmp, path)


def load(path: Path) -> Vault:
    path = Path(path)
    if not path.exists():
        raise NotFound(f"no vault at {path}")
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise VaultCorrupt(f"unreadable vault file: {exc}") from exc
    return Vault.from_json(obj)


def init_vault_file(path: Path, user_password: str, force: bool = False, **kwargs) -> Vault:
    path = Path(path)
    if path.exists() and not force:
        raise VaultExists(f"vault already exists at {path}")
    vault = init_vault(user_password, **kwargs)
    save(vault, path)
    return vault


def upsert_site(vault: Vault, config: SiteConfig) -> SiteConfig:
    """Insert or replace a site entry, bumping its version by exactly 1."""
    config.validate()
    old = vault.sites.get(config.site_key)
    stored = replace(
        config,
        version=(old.version + 1) if old else 1,
        updated_at=time.time(),
    )
    vault.sites[config.site_key] = stored
    return stored


def get_site(vault: Vault, site_key: str) -> SiteConfig:
    try:
        return vault.sites[site_key]
    except KeyError:
        raise NotFound(f"unknown site: {site_key}") from None


def list_sites(vault: Vault) -> list[SiteConfig]:
    return [vault.sites[k] for k in sorted(vault.sites)]


def _stage_one_input(master: bytes, user_password: str) -> bytes:
    # Length-prefixed so (master, password) pairs cannot collide.
    pw = user_password.encode("utf-8")
    return (
        len(master).to_bytes(4, "big")
        + master
        + len(pw).to_bytes(4, "big")
        + pw
    )


def generate_password(
    vault: Vault,
    user_password: str,
    site: str,
    object_content: Optional[bytes] = None,
    site_mode: str = "url",
    auto_register: bool = True,
) -> str:
    """unlock -> stretch -> normalize -> derive -> encode -> offset."""
    master = unlock(vault, user_password)
    g = vault.global_config
    site_key = derivation.normalize_site(site, mode=site_mode)
    config = vault.sites.get(site_key.value)
    if config is None:
        if not auto_register:
            raise NotFound(f"unknown site: {site_key.value}")
        config = upsert_site(
            vault, SiteConfig(site_key=site_key.value, site_source=site_key.source)
        )
    if config.use_object and object_content is None:
        raise MissingObject(f"site {site_key.value} requires a digital object")

    stretched = derivation.stretch(
        _stage_one_input(master, user_password), g.inner_iterations, g.hash_id
    )
    bundle = InputBundle(
        stretched_key=stretched,
        site_key=SiteKey(site_key.value, source=config.site_source),
        user_constant=g.user_constant if config.use_user_constant else None,
        user_name=config.user_name if config.use_user_name else None,
        object_digest=(
            derivation.digest_object(object_content, g.hash_id)
            if config.use_object and object_content is not None
            else None
        ),
    )
    bits = derivation.derive_bits(bundle, g.hash_id)
    base = policy_mod.encode(bits, config.policy, hash_id=g.hash_id)
    if config.offset is not None:
        charset = policy_mod.effective_charset(config.policy)
        return policy_mod.apply_offset(base, config.offset, charset)
    return base


def _base_password(
    vault: Vault,
    user_password: str,
    site: str,
    object_content: Optional[bytes],
    site_mode: str,
) -> tuple[SiteConfig, str]:
    """Generated password before any offset, plus the site's config."""
    site_key = derivation.normalize_site(site, mode=site_mode)
    config = vault.sites.get(site_key.value)
    saved_offset = config.offset if config else None
    if config is not None:
        config.offset = None
    try:
        base = generate_password(
            vault, user_password, site, object_content, site_mode=site_mode
        )
    finally:
        if config is not None:
            config.offset = saved_offset
    return vault.sites[site_key.value], base


def pin_password(
    vault: Vault,
    user_password: str,
    site: str,
    desired: str,
    object_content: Optional[bytes] = None,
    site_mode: str = "url",
) -> SiteConfig:
    """Store the offset that makes generation output `desired` exactly."""
    config, base = _base_password(vault, user_password, site, object_content, site_mode)
    charset = policy_mod.effective_charset(config.policy)
    offset = policy_mod.compute_offset(base, desired, charset)
    return upsert_site(vault, replace(config, offset=offset))


def rotate_password(
    vault: Vault,
    user_password: str,
    site: str,
    rng: Optional[random.Random] = None,
    object_content: Optional[bytes] = None,
    site_mode: str = "url",
) -> SiteConfig:
    """Replace the site offset with a random, still policy-compliant one."""
    if rng is None:
        rng = random.SystemRandom()
    config, base = _base_password(vault, user_password, site, object_content, site_mode)
    offset = policy_mod.random_offset(base, config.policy, rng)
    return upsert_site(vault, replace(config, offset=offset))
