from __future__ import annotations

import os

THREADS_ENV = "SCALEFIT_THREADS"


def max_workers() -> int:
    """Worker cap from ``SCALEFIT_THREADS``, defaulting to the CPU count."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError:
            value = 0
        if value >= 1:
            return value
    return os.cpu_count() or 1
