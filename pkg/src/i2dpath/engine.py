"""Discrete-event core: integer-microsecond clock, event queue, seeded streams."""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np


class TimeTravelError(ValueError):
    """Raised when an entry is scheduled before the current clock."""


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def us_from_seconds(seconds: float) -> int:
    return round_half_up(seconds * 1_000_000)


def period_us(rate_hz: float) -> int:
    """Period of a rate in integer microseconds (120 Hz -> 8333)."""
    if rate_hz <= 0:
        raise ValueError(f"rate must be positive, got {rate_hz}")
    return round_half_up(1_000_000 / rate_hz)


@dataclass(eq=False)
class Handle:
    time: int
    seq: int
    tag: str
    callback: Optional[Callable[[Any], None]] = None
    payload: Any = None
    cancelled: bool = False
    dispatched: bool = False

    def cancel(self) -> None:
        self.cancelled = True


@dataclass
class Engine:
    """Single-threaded event loop.

    Entries dispatch in (time, insertion sequence) order. Each dispatched
    entry is appended to ``log`` as ``(time, tag)`` when logging is enabled.
    """

    now: int = 0
    keep_log: bool = False
    log: list = field(default_factory=list)
    _queue: list = field(default_factory=list, repr=False)
    _seq: int = 0

    def schedule(self, at: int, tag: str, callback: Optional[Callable[[Any], None]] = None,
                 payload: Any = None) -> Handle:
        at = int(at)
        if at < self.now:
            raise TimeTravelError(f"time-travel: cannot schedule {tag!r} at {at} (clock {self.now})")
        handle = Handle(at, self._seq, tag, callback, payload)
        self._seq += 1
        heapq.heappush(self._queue, (at, handle.seq, handle))
        return handle

    def pending(self) -> int:
        return sum(1 for _, _, h in self._queue if not h.cancelled)

    def peek_time(self) -> Optional[int]:
        while self._queue and self._queue[0][2].cancelled:
            heapq.heappop(self._queue)
        return self._queue[0][0] if self._queue else None

    def run_until(self, end: int) -> int:
        end = int(end)
        dispatched = 0
        while self._queue and self._queue[0][0] <= end:
            at, _, handle = heapq.heappop(self._queue)
            if handle.cancelled:
                continue
            self.now = at
            handle.dispatched = True
            if self.keep_log:
                self.log.append((at, handle.tag))
            if handle.callback is not None:
                handle.callback(handle.payload)
            dispatched += 1
        if end > self.now:
            self.now = end
        return dispatched


def stream_key(master_seed: int, stream_id: str) -> int:
    digest = hashlib.sha256(f"{int(master_seed)}/{stream_id}".encode()).digest()
    return int.from_bytes(digest[:16], "little")


def random_stream(master_seed: int, stream_id: str) -> np.random.Generator:
    """Counter-based generator keyed by ``(master_seed, stream_id)``.

    Streams never share state, so adding a new label leaves every existing
    sequence untouched.
    """
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, stream_id)))


def truncated_normal(rng: np.random.Generator, mean: float, sigma: float,
                     lo: float = -math.inf, hi: float = math.inf) -> float:
    """Draw from N(mean, sigma) restricted to [lo, hi] by rejection."""
    if sigma <= 0:
        return float(min(max(mean, lo), hi))
    for _ in range(10_000):
        x = rng.normal(mean, sigma)
        if lo <= x <= hi:
            return float(x)
    return float(min(max(mean, lo), hi))
