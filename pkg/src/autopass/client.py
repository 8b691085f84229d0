"""Verifying, caching client for the sync service.

Every record is checked against the pinned service public key before use.
Policy lookups fall back to the vault's local cache when the service is
unreachable, but a bad signature is always surfaced, never masked by the
cache.
"""

from __future__ import annotations

import json
from typing import Optional

import requests

from .errors import (
    AuthenticationFailed,
    MergeConflictUnresolved,
    NotFound,
    SignatureInvalid,
    Unavailable,
    VersionConflict,
)
from .policy import PasswordPolicy
from .signing import SignedEnvelope, verify_envelope
from .vault import SiteConfig, Vault

_NETWORK_ERRORS = (requests.ConnectionError, requests.Timeout)


class SyncClient:
    def __init__(
        self,
        base_url: str,
        server_public_key: bytes,
        token: Optional[str] = None,
        timeout: float = 5.0,
        session: Optional[requests.Session] = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.server_public_key = server_public_key
        self.token = token
        self.timeout = timeout
        self.session = session or requests.Session()

    def _headers(self) -> dict:
        if not self.token:
            return {}
        return {"Authorization": f"Bearer {self.token}"}

    def _verified_payload(self, envelope_json: dict) -> dict:
        envelope = SignedEnvelope.from_json(envelope_json)
        payload = verify_envelope(self.server_public_key, envelope)
        return json.loads(payload.decode("utf-8"))

    def login(self, user_id: str, login_secret: str) -> str:
        try:
            resp = self.session.post(
                f"{self.base_url}/v1/login",
                json={"user_id": user_id, "login_secret": login_secret},
                timeout=self.timeout,
            )
        except _NETWORK_ERRORS as exc:
            raise Unavailable(f"login failed: {exc}") from exc
        if resp.status_code == 401:
            raise AuthenticationFailed("server rejected login credentials")
        resp.raise_for_status()
        self.token = resp.json()["token"]
        return self.token

    def fetch_policy(self, vault: Vault, domain: str) -> PasswordPolicy:
        """Signed policy from the service, or the cached copy when offline."""
        try:
            resp = self.session.get(
                f"{self.base_url}/v1/policies/{domain}", timeout=self.timeout
            )
        except _NETWORK_ERRORS:
            cached = vault.policy_cache.get(domain)
            if cached is None:
                raise Unavailable(
                    f"service unreachable and no cached policy for {domain}"
                ) from None
            record = self._verified_payload(cached)
            return PasswordPolicy.from_json(record["policy"])
        if resp.status_code == 404:
            raise NotFound(f"service has no policy for {domain}")
        resp.raise_for_status()
        envelope_json = resp.json()
        record = self._verified_payload(envelope_json)  # raises before caching
        vault.policy_cache[domain] = envelope_json
        return PasswordPolicy.from_json(record["policy"])

    # -- user record sync ------------------------------------------------

    def _fetch_user_record(self, user_id: str) -> dict:
        try:
            resp = self.session.get(
                f"{self.base_url}/v1/user/{user_id}/sites",
                headers=self._headers(),
                timeout=self.timeout,
            )
        except _NETWORK_ERRORS as exc:
            raise Unavailable(f"sync fetch failed: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthenticationFailed(resp.json().get("message", "sync auth failed"))
        resp.raise_for_status()
        return self._verified_payload(resp.json())

    def _merge_record(self, vault: Vault, record: dict) -> None:
        """Per-site merge: higher version wins, server wins ties."""
        for site_key, site_json in record.get("sites", {}).items():
            incoming = SiteConfig.from_json(site_json)
            local = vault.sites.get(site_key)
            if local is None or incoming.version >= local.version:
                vault.sites[site_key] = incoming
        vault.sync_record_version = record["record_version"]

    def sync_pull(self, vault: Vault, user_id: str) -> Vault:
        record = self._fetch_user_record(user_id)
        self._merge_record(vault, record)
        vault.sync_user_id = user_id
        return vault

    def _try_push(self, vault: Vault, user_id: str) -> int:
        sites = {k: v.to_json() for k, v in vault.sites.items()}
        try:
            resp = self.session.put(
                f"{self.base_url}/v1/user/{user_id}/sites",
                headers=self._headers(),
                json={"sites": sites, "expected_version": vault.sync_record_version},
                timeout=self.timeout,
            )
        except _NETWORK_ERRORS as exc:
            raise Unavailable(f"sync push failed: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthenticationFailed(resp.json().get("message", "sync auth failed"))
        if resp.status_code == 409:
            raise VersionConflict(resp.json().get("message", "version conflict"))
        resp.raise_for_status()
        return resp.json()["new_version"]

    def sync_push(self, vault: Vault, user_id: str) -> Vault:
        """Upload via compare-and-set, retrying once after a pull-merge."""
        try:
            vault.sync_record_version = self._try_push(vault, user_id)
        except VersionConflict:
            self.sync_pull(vault, user_id)
            try:
                vault.sync_record_version = self._try_push(vault, user_id)
            except VersionConflict as exc:
                raise MergeConflictUnresolved(
                    f"push conflicted again after pull-merge: {exc}"
                ) from exc
        vault.sync_user_id = user_id
        return vault
