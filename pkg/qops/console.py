"""Tagged status lines on stderr.

Lines look like ``✅ [TQ] sector l=2 residual=3.1e-13``. Warnings and
failures always print; everything else is silenced by ``QOPS_QUIET`` or
``set_quiet(True)``.
"""

import os
import sys
import threading

ICONS = {
    "info": "🔍",
    "ok": "✅",
    "warn": "⚠️",
    "fail": "❌",
    "run": "🚀",
    "report": "📊",
    "done": "🎉",
}

_ALWAYS = {"warn", "fail"}
_lock = threading.Lock()
_quiet_override = None


def _env_quiet() -> bool:
    return os.getenv("QOPS_QUIET", "").strip().lower() in {"1", "true", "yes", "on"}


def set_quiet(flag):
    """Force quiet mode on or off; ``None`` returns control to QOPS_QUIET."""
    global _quiet_override
    _quiet_override = flag


def is_quiet() -> bool:
    if _quiet_override is not None:
        return bool(_quiet_override)
    return _env_quiet()


def status(tag: str, message: str, kind: str = "info") -> None:
    if kind not in ICONS:
        raise ValueError(f"Unknown status kind: {kind}")
    if kind not in _ALWAYS and is_quiet():
        return
    line = f"{ICONS[kind]} [{tag.upper()}] {message}"
    with _lock:
        print(line, file=sys.stderr, flush=True)
