"""
Console logging shared by the CLI and the pipeline stages.

Same shape as the batch worker's log line: a UTC timestamp, a context tag,
then the message, flushed immediately so piped output stays in order.
"""

from __future__ import annotations

import time
from datetime import datetime, timezone

_context = "edge"
_verbose = False


def set_context(tag: str) -> None:
    global _context
    _context = tag


def set_verbose(flag: bool) -> None:
    global _verbose
    _verbose = bool(flag)


def is_verbose() -> bool:
    return _verbose


def log(msg: str) -> None:
    ts = datetime.now(timezone.utc).strftime("%H:%M:%S")
    print(f"[{ts}] {_context} {msg}", flush=True)


def warn(msg: str) -> None:
    print(f"[WARN] {_context} {msg}", flush=True)


def debug(msg: str) -> None:
    if _verbose:
        log(msg)


class Timer:
    """`with Timer("gabor bank"):` logs the elapsed time at debug level."""

    def __init__(self, label: str):
        self.label = label
        self.start = 0.0
        self.elapsed = 0.0

    def __enter__(self) -> "Timer":
        self.start = time.time()
        return self

    def __exit__(self, *exc) -> None:
        self.elapsed = time.time() - self.start
        debug(f"{self.label}: {self.elapsed:.2f}s")
