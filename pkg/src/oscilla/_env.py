"""Process-level knobs shared by the heavy evaluation paths."""

from __future__ import annotations

import os


def worker_count(requested: int | None = None) -> int:
    """Worker pool size: explicit request, else OSCILLA_THREADS, else 1."""
    if requested is not None and requested >= 1:
        return int(requested)
    env = os.environ.get("OSCILLA_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"OSCILLA_THREADS must be an integer, got {env!r}")
    return 1
