"""Worker-count policy shared by the library and the CLI."""

from __future__ import annotations

import os

ENV_VAR = "SHIELD_THREADS"


def worker_count(default: int = 1) -> int:
    """Workers allowed by ``SHIELD_THREADS`` (a positive integer); ``default`` when unset."""
    raw = os.environ.get(ENV_VAR, "").strip()
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}")
    return n
