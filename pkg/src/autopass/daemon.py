"""Loopback-only daemon exposing the vault to the companion web UI.

One unlock per session: the user password is posted once and held in
memory, wiped after ten minutes of inactivity.  Vault mutations are
persisted under the vault lock.  Static UI assets are served from a
directory so the whole front end stays local.
"""

from __future__ import annotations

import ipaddress
import json
import mimetypes
import os
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from filelock import FileLock

from . import vault as vault_mod
from .errors import (
    AuthenticationFailed,
    AutopassError,
    CharOutOfCharset,
    LengthMismatch,
    MissingObject,
    NotFound,
    RetriesExhausted,
    UnsatisfiablePolicy,
)

SESSION_TIMEOUT_SECONDS = 600
DEFAULT_CLIPBOARD_CLEAR_SECONDS = 60

_UI_DIR = Path(__file__).parent / "ui"


class DaemonState:
    def __init__(
        self,
        vault_path: Path,
        lock_path: Path,
        clipboard_clear_seconds: int = DEFAULT_CLIPBOARD_CLEAR_SECONDS,
        session_timeout: float = SESSION_TIMEOUT_SECONDS,
        clock=time.time,
    ) -> None:
        self.vault_path = Path(vault_path)
        self.file_lock = FileLock(str(lock_path))
        self.lock = threading.Lock()
        self.vault = vault_mod.load(vault_path)
        self.clipboard_clear_seconds = clipboard_clear_seconds
        self.session_timeout = session_timeout
        self.clock = clock
        self._user_password: Optional[str] = None
        self._last_used = 0.0

    def open_session(self, user_password: str) -> None:
        with self.lock:
            vault_mod.unlock(self.vault, user_password)  # raises on bad password
            self._user_password = user_password
            self._last_used = self.clock()

    def close_session(self) -> None:
        with self.lock:
            self._user_password = None

    def _session_password(self) -> str:
        # caller holds self.lock
        if self._user_password is None:
            raise AuthenticationFailed("no unlocked session")
        if self.clock() - self._last_used > self.session_timeout:
            self._user_password = None
            raise AuthenticationFailed("session expired")
        self._last_used = self.clock()
        return self._user_password

    def _save(self) -> None:
        with self.file_lock:
            vault_mod.save(self.vault, self.vault_path)

    def generate(self, site: str, object_path: Optional[str] = None) -> str:
        with self.lock:
            password = self._session_password()
            content = Path(object_path).read_bytes() if object_path else None
            before = len(self.vault.sites)
            result = vault_mod.generate_password(
                self.vault, password, site, object_content=content
            )
            if len(self.vault.sites) != before:  # auto-registered
                self._save()
            return result

    def pin(self, site: str, desired: str) -> None:
        with self.lock:
            password = self._session_password()
            vault_mod.pin_password(self.vault, password, site, desired)
            self._save()

    def rotate(self, site: str) -> None:
        with self.lock:
            password = self._session_password()
            vault_mod.rotate_password(self.vault, password, site)
            self._save()

    def sites(self) -> list[dict]:
        with self.lock:
            self._session_password()
            return [
                {
                    "site_key": c.site_key,
                    "version": c.version,
                    "has_offset": c.offset is not None,
                    "has_reminder": c.reminder is not None,
                }
                for c in vault_mod.list_sites(self.vault)
            ]

    def reminder(self, site_key: str) -> Optional[str]:
        with self.lock:
            self._session_password()
            return vault_mod.get_site(self.vault, site_key).reminder


def _status_for(exc: AutopassError) -> int:
    if isinstance(exc, AuthenticationFailed):
        return 401
    if isinstance(exc, NotFound):
        return 404
    if isinstance(
        exc,
        (UnsatisfiablePolicy, RetriesExhausted, CharOutOfCharset, LengthMismatch),
    ):
        return 422
    return 400


class _DaemonHandler(BaseHTTPRequestHandler):
    state: DaemonState
    ui_dir: Path
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        if os.environ.get("AUTOPASS_DAEMON_VERBOSE"):
            super().log_message(fmt, *args)

    def _send_json(self, status: int, obj) -> None:
        body = json.dumps(obj).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str) -> None:
        self._send_json(status, {"code": status, "message": message})

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length", "0"))
        if length == 0:
            return {}
        return json.loads(self.rfile.read(length).decode("utf-8"))

    def do_POST(self) -> None:
        path = self.path.rstrip("/")
        try:
            if path == "/session":
                self.state.open_session(self._body()["user_password"])
                return self._send_json(200, {"ok": True})
            if path == "/session/close":
                self.state.close_session()
                return self._send_json(200, {"ok": True})
            if path == "/generate":
                body = self._body()
                pw = self.state.generate(body["site"], body.get("object_path"))
                return self._send_json(200, {"password": pw})
            if path == "/pin":
                body = self._body()
                self.state.pin(body["site"], body["desired"])
                return self._send_json(200, {"ok": True})
            if path == "/rotate":
                self.state.rotate(self._body()["site"])
                return self._send_json(200, {"ok": True})
        except AuthenticationFailed:
            return self._error(401, "authentication failed")
        except MissingObject as exc:
            return self._error(422, str(exc))
        except (KeyError, json.JSONDecodeError):
            return self._error(400, "malformed request")
        except AutopassError as exc:
            return self._error(_status_for(exc), str(exc))
        self._error(404, "no such endpoint")

    def do_GET(self) -> None:
        path = self.path.split("?")[0]
        try:
            if path == "/sites":
                return self._send_json(200, {"sites": self.state.sites()})
            if path.startswith("/reminder/"):
                site = path[len("/reminder/"):]
                return self._send_json(200, {"reminder": self.state.reminder(site)})
            if path == "/config":
                return self._send_json(
                    200,
                    {"clipboard_clear_seconds": self.state.clipboard_clear_seconds},
                )
        except AuthenticationFailed:
            return self._error(401, "authentication failed")
        except AutopassError as exc:
            return self._error(_status_for(exc), str(exc))
        self._serve_static(path)

    def _serve_static(self, path: str) -> None:
        if path in ("", "/"):
            path = "/index.html"
        target = (self.ui_dir / path.lstrip("/")).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            return self._error(404, "not found")
        body = target.read_bytes()
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def is_loopback(host: str) -> bool:
    if host in ("localhost", ""):
        return True
    try:
        return ipaddress.ip_address(host).is_loopback
    except ValueError:
        return False


def make_daemon(
    state: DaemonState,
    host: str = "127.0.0.1",
    port: int = 7870,
    allow_remote: bool = False,
    ui_dir: Optional[Path] = None,
) -> ThreadingHTTPServer:
    if not allow_remote and not is_loopback(host):
        raise AutopassError(
            f"refusing non-loopback bind {host!r} without --allow-remote"
        )
    handler = type(
        "BoundDaemonHandler",
        (_DaemonHandler,),
        {"state": state, "ui_dir": Path(ui_dir) if ui_dir else _UI_DIR},
    )
    return ThreadingHTTPServer((host, port), handler)
