"""Command-line front end.

Exit codes: 2 usage, 3 authentication, 4 policy, 5 network, 6 conflict.
Secrets are read with echo off on a terminal and from stdin otherwise, so
every command stays scriptable.  Generated passwords go to stdout or to
the clipboard (cleared after a configurable interval, default 60 s); they
are never logged.
"""

from __future__ import annotations

import argparse
import base64
import getpass
import os
import random
import sys
from pathlib import Path
from typing import Optional

from filelock import FileLock

from . import clipboard, daemon as daemon_mod, vault as vault_mod
from .client import SyncClient
from .derivation import normalize_site
from .errors import (
    AuthenticationFailed,
    AutopassError,
    CharOutOfCharset,
    LengthMismatch,
    MergeConflictUnresolved,
    ModulusMismatch,
    NotFound,
    RetriesExhausted,
    Unavailable,
    UnsatisfiablePolicy,
    VersionConflict,
)
from .policy import PasswordPolicy
from .vault import SiteConfig

EXIT_USAGE = 2
EXIT_AUTH = 3
EXIT_POLICY = 4
EXIT_NETWORK = 5
EXIT_CONFLICT = 6

DEFAULT_CLIP_SECONDS = 60


def _home() -> Path:
    return Path(os.environ.get("AUTOPASS_HOME", Path.home() / ".autopass"))


def _vault_path() -> Path:
    return _home() / "vault.json"


def _vault_lock() -> FileLock:
    _home().mkdir(parents=True, exist_ok=True)
    return FileLock(str(_home() / "vault.lock"))


def _read_secret(prompt: str, confirm: bool = False) -> str:
    if sys.stdin.isatty():
        value = getpass.getpass(prompt)
        if confirm:
            again = getpass.getpass("Repeat: ")
            if value != again:
                print("error: passwords do not match", file=sys.stderr)
                raise SystemExit(EXIT_USAGE)
    else:
        value = sys.stdin.readline().rstrip("\n")
    if not value:
        print("error: empty secret", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    return value


def _sync_client() -> Optional[SyncClient]:
    url = os.environ.get("AUTOPASS_SERVER_URL")
    pubkey = os.environ.get("AUTOPASS_SERVER_PUBKEY")
    if not url or not pubkey:
        return None
    return SyncClient(url, base64.b64decode(pubkey))


def _require_sync_client() -> SyncClient:
    client = _sync_client()
    if client is None:
        print(
            "error: set AUTOPASS_SERVER_URL and AUTOPASS_SERVER_PUBKEY",
            file=sys.stderr,
        )
        raise SystemExit(EXIT_USAGE)
    return client


def _site_mode(args) -> str:
    return "user_site_name" if args.site_name else "url"


def _load_vault():
    return vault_mod.load(_vault_path())


# -- subcommands ---------------------------------------------------------


def cmd_init(args) -> int:
    password = _read_secret("User password: ", confirm=True)
    with _vault_lock():
        vault_mod.init_vault_file(
            _vault_path(),
            password,
            force=args.force,
            kdf_iterations=args.kdf_iterations,
            inner_iterations=args.inner_iterations,
            user_constant=args.user_constant,
        )
    print(f"vault created at {_vault_path()}")
    return 0


def _policy_from_args(args) -> Optional[PasswordPolicy]:
    if not (args.length or args.allow or args.require or args.forbid):
        return None
    length = args.length or 12
    allowed = frozenset(args.allow.split(",")) if args.allow else frozenset(
        {"lower", "upper", "digit", "symbol"}
    )
    required = frozenset(args.require.split(",")) if args.require else frozenset()
    return PasswordPolicy(
        length_min=length,
        length_max=length,
        allowed_classes=allowed,
        required_classes=required,
        forbidden_chars=frozenset(args.forbid or ""),
    )


def cmd_add(args) -> int:
    site_key = normalize_site(args.site, mode=_site_mode(args))
    policy = _policy_from_args(args)
    with _vault_lock():
        vault = _load_vault()
        if policy is None:
            client = _sync_client()
            if client is not None:
                try:
                    policy = client.fetch_policy(vault, site_key.value)
                except (Unavailable, NotFound):
                    policy = None
        config = SiteConfig(
            site_key=site_key.value,
            policy=policy or vault_mod.DEFAULT_POLICY,
            use_user_constant=args.use_user_constant,
            use_user_name=args.user_name is not None,
            use_object=args.use_object,
            user_name=args.user_name,
            reminder=args.reminder,
            site_source=site_key.source,
        )
        stored = vault_mod.upsert_site(vault, config)
        vault_mod.save(vault, _vault_path())
    print(f"site {stored.site_key} stored (version {stored.version})")
    return 0


def cmd_gen(args) -> int:
    password = _read_secret("User password: ")
    content = Path(args.object).read_bytes() if args.object else None
    with _vault_lock():
        vault = _load_vault()
        before = len(vault.sites)
        result = vault_mod.generate_password(
            vault, password, args.site, object_content=content,
            site_mode=_site_mode(args),
        )
        if len(vault.sites) != before:
            vault_mod.save(vault, _vault_path())
    if args.clip:
        seconds = int(
            os.environ.get("AUTOPASS_CLIPBOARD_CLEAR_SECONDS", DEFAULT_CLIP_SECONDS)
        )
        clipboard.copy_with_timeout(result, seconds)
        print(f"password copied to clipboard; clearing in {seconds}s", file=sys.stderr)
    else:
        if sys.stdout.isatty():
            print("warning: printing password to terminal", file=sys.stderr)
        print(result)
    return 0


def cmd_pin(args) -> int:
    password = _read_secret("User password: ")
    desired = _read_secret("Desired password: ")
    content = Path(args.object).read_bytes() if args.object else None
    with _vault_lock():
        vault = _load_vault()
        vault_mod.pin_password(
            vault, password, args.site, desired,
            object_content=content, site_mode=_site_mode(args),
        )
        vault_mod.save(vault, _vault_path())
    print("password pinned")
    return 0


def cmd_rotate(args) -> int:
    password = _read_secret("User password: ")
    content = Path(args.object).read_bytes() if args.object else None
    rng = random.Random(args.seed) if args.seed is not None else None
    with _vault_lock():
        vault = _load_vault()
        vault_mod.rotate_password(
            vault, password, args.site, rng=rng,
            object_content=content, site_mode=_site_mode(args),
        )
        vault_mod.save(vault, _vault_path())
    print("password rotated")
    return 0


def cmd_reminder(args) -> int:
    site_key = normalize_site(args.site, mode=_site_mode(args))
    with _vault_lock():
        vault = _load_vault()
        config = vault_mod.get_site(vault, site_key.value)
        if args.set is not None:
            from dataclasses import replace

            vault_mod.upsert_site(vault, replace(config, reminder=args.set))
            vault_mod.save(vault, _vault_path())
            print("reminder stored")
        else:
            print(config.reminder or "(no reminder)")
    return 0


def cmd_list(args) -> int:
    vault = _load_vault()
    for config in vault_mod.list_sites(vault):
        marks = []
        if config.offset:
            marks.append("offset")
        if config.use_object:
            marks.append("object")
        suffix = f"  [{', '.join(marks)}]" if marks else ""
        print(f"{config.site_key}  v{config.version}{suffix}")
    return 0


def cmd_sync(args) -> int:
    client = _require_sync_client()
    secret = _read_secret("Login secret: ")
    client.login(args.user, secret)
    with _vault_lock():
        vault = _load_vault()
        if args.direction == "push":
            client.sync_push(vault, args.user)
        else:
            client.sync_pull(vault, args.user)
        vault_mod.save(vault, _vault_path())
    print(f"sync {args.direction} complete (record version {vault.sync_record_version})")
    return 0


def cmd_policy_fetch(args) -> int:
    client = _require_sync_client()
    with _vault_lock():
        vault = _load_vault()
        policy = client.fetch_policy(vault, args.domain)
        vault_mod.save(vault, _vault_path())
    print(
        f"{args.domain}: length {policy.length_min}-{policy.length_max}, "
        f"allowed {sorted(policy.allowed_classes)}, "
        f"required {sorted(policy.required_classes)}"
    )
    return 0


def cmd_serve(args) -> int:
    host, _, port = args.listen.rpartition(":")
    state = daemon_mod.DaemonState(
        _vault_path(),
        _home() / "vault.lock",
        clipboard_clear_seconds=args.clipboard_clear_seconds,
    )
    ui_dir = args.ui_dir or os.environ.get("AUTOPASS_UI_DIR")
    server = daemon_mod.make_daemon(
        state,
        host or "127.0.0.1",
        int(port),
        allow_remote=args.allow_remote,
        ui_dir=Path(ui_dir) if ui_dir else None,
    )
    print(
        f"autopass daemon on {server.server_address[0]}:{server.server_address[1]}",
        flush=True,
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# -- parser --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autopass",
        description="Deterministic site-specific password generator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a new vault")
    p.add_argument("--force", action="store_true")
    p.add_argument("--kdf-iterations", type=int, default=vault_mod.DEFAULT_KDF_ITERATIONS)
    p.add_argument(
        "--inner-iterations", type=int, default=vault_mod.DEFAULT_INNER_ITERATIONS
    )
    p.add_argument("--user-constant", default="")
    p.set_defaults(func=cmd_init)

    def site_arg(p):
        p.add_argument("site")
        p.add_argument(
            "--site-name",
            action="store_true",
            help="treat SITE as a memorable name, not a URL",
        )

    p = sub.add_parser("add", help="register a site")
    site_arg(p)
    p.add_argument("--length", type=int)
    p.add_argument("--allow", help="comma-separated classes (lower,upper,digit,symbol)")
    p.add_argument("--require", help="comma-separated required classes")
    p.add_argument("--forbid", help="characters the site rejects")
    p.add_argument("--use-object", action="store_true")
    p.add_argument("--use-user-constant", action="store_true")
    p.add_argument("--user-name")
    p.add_argument("--reminder")
    p.set_defaults(func=cmd_add)

    p = sub.add_parser("gen", help="generate the password for a site")
    site_arg(p)
    p.add_argument("--object", help="path to the digital object file")
    out = p.add_mutually_exclusive_group()
    out.add_argument("--stdout", action="store_true", default=True)
    out.add_argument("--clip", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("pin", help="pin an existing password for a site")
    site_arg(p)
    p.add_argument("--object")
    p.set_defaults(func=cmd_pin)

    p = sub.add_parser("rotate", help="rotate a site password via a fresh offset")
    site_arg(p)
    p.add_argument("--object")
    p.add_argument("--seed", type=int, help="seed the rotation (for reproducibility)")
    p.set_defaults(func=cmd_rotate)

    p = sub.add_parser("reminder", help="show or set the site reminder")
    site_arg(p)
    p.add_argument("--set", metavar="TEXT")
    p.set_defaults(func=cmd_reminder)

    p = sub.add_parser("list", help="list registered sites")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("sync", help="synchronize with the cloud service")
    p.add_argument("direction", choices=["push", "pull"])
    p.add_argument("--user", required=True)
    p.set_defaults(func=cmd_sync)

    p = sub.add_parser("policy", help="policy operations")
    policy_sub = p.add_subparsers(dest="policy_command", required=True)
    pf = policy_sub.add_parser("fetch", help="fetch and cache a domain policy")
    pf.add_argument("domain")
    pf.set_defaults(func=cmd_policy_fetch)

    p = sub.add_parser("serve", help="run the local daemon for the web UI")
    p.add_argument("--listen", default="127.0.0.1:7870")
    p.add_argument("--allow-remote", action="store_true")
    p.add_argument("--ui-dir")
    p.add_argument(
        "--clipboard-clear-seconds",
        type=int,
        default=int(
            os.environ.get("AUTOPASS_CLIPBOARD_CLEAR_SECONDS", DEFAULT_CLIP_SECONDS)
        ),
    )
    p.set_defaults(func=cmd_serve)

    return parser


def _exit_code_for(exc: AutopassError) -> int:
    if isinstance(exc, AuthenticationFailed):
        return EXIT_AUTH
    if isinstance(
        exc,
        (
            UnsatisfiablePolicy,
            RetriesExhausted,
            CharOutOfCharset,
            LengthMismatch,
            ModulusMismatch,
        ),
    ):
        return EXIT_POLICY
    if isinstance(exc, Unavailable):
        return EXIT_NETWORK
    if isinstance(exc, (VersionConflict, MergeConflictUnresolved)):
        return EXIT_CONFLICT
    return 1


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AutopassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
