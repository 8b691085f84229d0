"""The AutoPass cloud service.

Stores user-independent password policies (public, signed) and per-user
site configuration records (bearer-token protected, signed, mutated only
through compare-and-set on the record version).  Desk-scale by design: a
threaded HTTP server over a single-file JSON store.
"""

from __future__ import annotations

import argparse
import base64
import json
import os
import secrets
import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Optional

from .errors import NotFound, VersionConflict
from .policy import PasswordPolicy
from .signing import generate_keypair, sign_envelope

TOKEN_LIFETIME_SECONDS = 30 * 24 * 3600
DEFAULT_KEY_ID = "autopass-service-1"


class ServerStore:
    """In-memory state with optional JSON-file persistence.

    All mutations run under one lock, which is what makes the record-level
    compare-and-set atomic.
    """

    def __init__(
        self,
        path: Optional[Path] = None,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.path = Path(path) if path else None
        self.clock = clock
        self.lock = threading.Lock()
        self.policies: dict[str, dict] = {}  # domain -> {"policy", "record_version"}
        self.users: dict[str, str] = {}  # user_id -> login_secret
        self.user_records: dict[str, dict] = {}  # user_id -> {"sites", "record_version"}
        self.tokens: dict[str, dict] = {}  # token -> {"user_id", "expiry"}
        if self.path and self.path.exists():
            self._load()

    def _load(self) -> None:
        obj = json.loads(self.path.read_text())
        self.policies = obj.get("policies", {})
        self.users = obj.get("users", {})
        self.user_records = obj.get("user_records", {})

    def _persist_locked(self) -> None:
        if not self.path:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(
            json.dumps(
                {
                    "policies": self.policies,
                    "users": self.users,
                    "user_records": self.user_records,
                },
                indent=2,
                sort_keys=True,
            )
        )
        os.replace(tmp, self.path)

    # -- user-independent data ------------------------------------------

    def set_policy(self, domain: str, policy: PasswordPolicy) -> int:
        with self.lock:
            old = self.policies.get(domain)
            version = (old["record_version"] + 1) if old else 1
            self.policies[domain] = {
                "domain": domain,
                "policy": policy.to_json(),
                "record_version": version,
            }
            self._persist_locked()
            return version

    def get_policy_record(self, domain: str) -> dict:
        with self.lock:
            record = self.policies.get(domain)
        if record is None:
            raise NotFound(f"no policy for domain {domain}")
        return record

    # -- accounts and tokens --------------------------------------------

    def register_user(self, user_id: str, login_secret: str) -> None:
        with self.lock:
            self.users[user_id] = login_secret
            self.user_records.setdefault(
                user_id, {"user_id": user_id, "sites": {}, "record_version": 0}
            )
            self._persist_locked()

    def login(self, user_id: str, login_secret: str) -> Optional[dict]:
        with self.lock:
            expected = self.users.get(user_id)
            if expected is None or not secrets.compare_digest(expected, login_secret):
                return None
            token = secrets.token_urlsafe(32)
            expiry = int(self.clock()) + TOKEN_LIFETIME_SECONDS
            self.tokens[token] = {"user_id": user_id, "expiry": expiry}
            return {"token": token, "expiry": expiry}

    def token_user(self, token: str) -> Optional[str]:
        with self.lock:
            entry = self.tokens.get(token)
            if entry is None:
                return None
            if self.clock() >= entry["expiry"]:
                del self.tokens[token]
                return None
            return entry["user_id"]

    # -- user-specific data ---------------------------------------------

    def get_user_record(self, user_id: str) -> dict:
        with self.lock:
            record = self.user_records.get(user_id)
        if record is None:
            raise NotFound(f"no record for user {user_id}")
        return record

    def put_user_record(self, user_id: str, sites: dict, expected_version: int) -> int:
        with self.lock:
            record = self.user_records.get(
                user_id, {"user_id": user_id, "sites": {}, "record_version": 0}
            )
            if record["record_version"] != expected_version:
                raise VersionConflict(
                    f"expected version {expected_version}, "
                    f"stored {record['record_version']}"
                )
            new_version = record["record_version"] + 1
            self.user_records[user_id] = {
                "user_id": user_id,
                "sites": sites,
                "record_version": new_version,
            }
            self._persist_locked()
            return new_version


def canonical_payload(obj: dict) -> bytes:
    """Stable JSON bytes, the exact thing that gets signed."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


class AutopassService:
    def __init__(
        self,
        store: ServerStore,
        signing_key: bytes,
        key_id: str = DEFAULT_KEY_ID,
    ) -> None:
        self.store = store
        self.signing_key = signing_key
        self.key_id = key_id

    def signed(self, payload_obj: dict) -> dict:
        envelope = sign_envelope(
            self.signing_key, self.key_id, canonical_payload(payload_obj)
        )
        return envelope.to_json()


class _Handler(BaseHTTPRequestHandler):
    service: AutopassService  # set by make_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        if os.environ.get("AUTOPASS_SERVER_VERBOSE"):
            super().log_message(fmt, *args)

    def _send(self, status: int, obj: dict) -> None:
        body = json.dumps(obj).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str) -> None:
        self._send(status, {"code": status, "message": message})

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", "0"))
        if length == 0:
            return {}
        return json.loads(self.rfile.read(length).decode("utf-8"))

    def _auth_user(self) -> Optional[str]:
        header = self.headers.get("Authorization", "")
        if not header.startswith("Bearer "):
            return None
        return self.service.store.token_user(header[len("Bearer "):].strip())

    def do_GET(self) -> None:
        parts = self.path.rstrip("/").split("/")
        if len(parts) == 4 and parts[1] == "v1" and parts[2] == "policies":
            return self._get_policy(parts[3])
        if (
            len(parts) == 5
            and parts[1] == "v1"
            and parts[2] == "user"
            and parts[4] == "sites"
        ):
            return self._get_user_sites(parts[3])
        self._error(404, "no such endpoint")

    def do_POST(self) -> None:
        if self.path.rstrip("/") == "/v1/login":
            return self._login()
        self._error(404, "no such endpoint")

    def do_PUT(self) -> None:
        parts = self.path.rstrip("/").split("/")
        if (
            len(parts) == 5
            and parts[1] == "v1"
            and parts[2] == "user"
            and parts[4] == "sites"
        ):
            return self._put_user_sites(parts[3])
        self._error(404, "no such endpoint")

    # -- endpoint bodies -------------------------------------------------

    def _get_policy(self, domain: str) -> None:
        try:
            record = self.service.store.get_policy_record(domain)
        except NotFound:
            return self._error(404, f"unknown domain: {domain}")
        self._send(200, self.service.signed(record))

    def _login(self) -> None:
        try:
            body = self._read_body()
            user_id = body["user_id"]
            login_secret = body["login_secret"]
        except (KeyError, json.JSONDecodeError):
            return self._error(400, "malformed login request")
        result = self.service.store.login(user_id, login_secret)
        if result is None:
            return self._error(401, "invalid credentials")
        self._send(200, result)

    def _get_user_sites(self, user_id: str) -> None:
        token_user = self._auth_user()
        if token_user is None:
            return self._error(401, "missing or expired token")
        if token_user != user_id:
            return self._error(403, "token belongs to another user")
        record = self.service.store.get_user_record(user_id)
        self._send(200, self.service.signed(record))

    def _put_user_sites(self, user_id: str) -> None:
        token_user = self._auth_user()
        if token_user is None:
            return self._error(401, "missing or expired token")
        if token_user != user_id:
            return self._error(403, "token belongs to another user")
        try:
            body = self._read_body()
            sites = body["sites"]
            expected_version = body["expected_version"]
        except (KeyError, json.JSONDecodeError):
            return self._error(400, "malformed record upload")
        try:
            new_version = self.service.store.put_user_record(
                user_id, sites, expected_version
            )
        except VersionConflict as exc:
            return self._error(409, str(exc))
        self._send(200, {"new_version": new_version})


def make_server(
    service: AutopassService, host: str = "127.0.0.1", port: int = 0
) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def load_or_create_signing_key(path: Path) -> tuple[bytes, bytes]:
    """Read the base64 private key at `path`, creating one on first run."""
    path = Path(path)
    if path.exists():
        private = base64.b64decode(path.read_text().strip())
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

        public = (
            Ed25519PrivateKey.from_private_bytes(private).public_key().public_bytes_raw()
        )
        return private, public
    private, public = generate_keypair()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(base64.b64encode(private).decode("ascii") + "\n")
    os.chmod(path, 0o600)
    return private, public


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="autopass-server")
    parser.add_argument("--listen", default="127.0.0.1:7860", metavar="ADDR:PORT")
    parser.add_argument("--store", default="autopass-server.json", metavar="PATH")
    parser.add_argument("--signing-key", default="autopass-server.key", metavar="PATH")
    parser.add_argument(
        "--add-user",
        action="append",
        default=[],
        metavar="USER:SECRET",
        help="register a user before serving (repeatable)",
    )
    args = parser.parse_args(argv)

    host, _, port = args.listen.rpartition(":")
    private, public = load_or_create_signing_key(Path(args.signing_key))
    store = ServerStore(Path(args.store))
    for entry in args.add_user:
        user_id, _, login_secret = entry.partition(":")
        store.register_user(user_id, login_secret)
    service = AutopassService(store, private)
    server = make_server(service, host or "127.0.0.1", int(port))
    print(
        f"autopass-server listening on {server.server_address[0]}:"
        f"{server.server_address[1]}",
        flush=True,
    )
    print(
        "public key (base64): " + base64.b64encode(public).decode("ascii"),
        flush=True,
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
