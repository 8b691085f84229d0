"""Clipboard helpers with timed clearing.

Backends, in order: the file named by AUTOPASS_CLIPBOARD_FILE (used in
tests and headless environments), the command in AUTOPASS_CLIPBOARD_CMD,
then the usual platform tools.  Clearing is done by a detached helper
process so the CLI can return immediately; the file backend only clears
if the clipboard still holds the value we put there.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import sys
import time
from pathlib import Path
from typing import Optional

from .errors import AutopassError


class ClipboardUnavailable(AutopassError):
    pass


def _platform_cmd() -> Optional[list[str]]:
    for cmd in (["wl-copy"], ["xclip", "-selection", "clipboard"], ["pbcopy"]):
        if shutil.which(cmd[0]):
            return cmd
    return None


def copy(text: str) -> None:
    file_path = os.environ.get("AUTOPASS_CLIPBOARD_FILE")
    if file_path:
        Path(file_path).write_text(text)
        return
    cmd_env = os.environ.get("AUTOPASS_CLIPBOARD_CMD")
    cmd = cmd_env.split() if cmd_env else _platform_cmd()
    if cmd is None:
        raise ClipboardUnavailable(
            "no clipboard tool found; set AUTOPASS_CLIPBOARD_CMD or use --stdout"
        )
    subprocess.run(cmd, input=text.encode("utf-8"), check=True)


def clear(expected: Optional[str] = None) -> None:
    file_path = os.environ.get("AUTOPASS_CLIPBOARD_FILE")
    if file_path:
        path = Path(file_path)
        if expected is not None and path.exists() and path.read_text() != expected:
            return  # someone else owns the clipboard now
        path.write_text("")
        return
    copy("")


def copy_with_timeout(text: str, seconds: int) -> None:
    """Copy now, clear from a detached helper after `seconds`."""
    copy(text)
    proc = subprocess.Popen(
        [sys.executable, "-m", "autopass.clipboard", str(seconds)],
        stdin=subprocess.PIPE,
        start_new_session=True,
        env=os.environ.copy(),
    )
    proc.stdin.write(text.encode("utf-8"))
    proc.stdin.close()


def _helper_main(argv: list[str]) -> int:
    seconds = int(argv[0])
    expected = sys.stdin.buffer.read().decode("utf-8")
    time.sleep(seconds)
    clear(expected or None)
    return 0


if __name__ == "__main__":
    sys.exit(_helper_main(sys.argv[1:]))
