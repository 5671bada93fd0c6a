"""Building blocks shared by the path designs.

The T_app predictor, the just-in-time trigger computation, the drop-limited
latch rule, the position-aware rendering gate and the just-enough-pixels
submission rule. All are pure or own only their small piece of state.
"""

from __future__ import annotations

import math
import statistics
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .display import scanout_reach_time
from .domain import DirtyRegion, DisplayConfig, InvariantViolation
from .engine import round_half_up

PREDICTOR_MODES = ("mean", "mean_plus_ksigma", "window_max")


class Predictor:
    """History-based T_app predictor over a sliding window.

    Returns ``prior`` until the window is full. ``bias`` is added to every
    prediction (sensitivity studies of over/underprediction).
    """

    def __init__(self, mode: str = "mean", k: float = 1.0, prior: int = 8000,
                 window: int = 32, seed: Optional[Sequence[int]] = None, bias: int = 0):
        if mode not in PREDICTOR_MODES:
            raise ValueError(f"unknown predictor mode {mode!r}")
        if window < 1 or window > 32:
            raise ValueError("window must be in [1, 32]")
        if prior <= 0:
            raise ValueError("prior must be positive")
        self.mode = mode
        self.k = k
        self.prior = int(prior)
        self.size = window
        self.bias = int(bias)
        self.window: deque = deque(maxlen=window)
        for v in seed or ():
            self.update(v)

    def update(self, observed: int) -> "Predictor":
        if observed <= 0:
            raise ValueError("observed T_app must be positive")
        self.window.append(int(observed))
        return self

    def predict(self) -> int:
        if len(self.window) < self.size:
            return max(1, self.prior + self.bias)
        if self.mode == "window_max":
            return max(1, max(self.window) + self.bias)
        mean = statistics.fmean(self.window)
        if self.mode == "mean_plus_ksigma" and len(self.window) > 1:
            mean += self.k * statistics.stdev(self.window)
        return max(1, round_half_up(mean) + self.bias)


@dataclass(frozen=True)
class JittConfig:
    t_out_pred: int = 3500

    def __post_init__(self):
        if self.t_out_pred <= 0:
            raise ValueError("t_out_pred must be positive")


@dataclass(frozen=True)
class ParConfig:
    rect_w: int = 200
    rect_h: int = 200
    guard: int = 0
    detection: str = "app_declared"
    sample_fraction: float = 0.01
    false_negative_prob: float = 0.0

    def __post_init__(self):
        if self.rect_w <= 0 or self.rect_h <= 0:
            raise ValueError("PAR rectangle must be non-empty")
        if self.detection not in ("app_declared", "sampled"):
            raise ValueError(f"unknown detection mode {self.detection!r}")
        if not 0 < self.sample_fraction <= 1:
            raise ValueError("sample_fraction must be in (0, 1]")
        if not 0 <= self.false_negative_prob <= 1:
            raise ValueError("false_negative_prob must be a probability")


def jitt_trigger_time(t_refresh: int, t_app_pred: int, t_out_pred: int,
                      arrivals: Sequence[int]) -> int:
    """Instant to deliver events so the frame is latched before ``t_refresh``.

    The arrival time of the last expected event at or before the deadline
    ``t_refresh - (t_app_pred + t_out_pred)``; the deadline itself when no
    expected arrival falls in ``(previous refresh, deadline]``.
    """
    deadline = t_refresh - (t_app_pred + t_out_pred)
    best = None
    for a in arrivals:
        if a <= deadline and (best is None or a > best):
            best = a
    return deadline if best is None else best


def expected_arrivals(last_arrival: int, gap: float, start: int, end: int) -> list[int]:
    """Arrival schedule ``last + k*gap`` clipped to ``[start, end]``."""
    out = []
    if gap <= 0:
        return out
    k = max(0, math.ceil((start - last_arrival) / gap))
    while True:
        t = last_arrival + round_half_up(k * gap)
        if t > end:
            return out
        if t >= start:
            out.append(t)
        k += 1


@dataclass
class CycleLedger:
    dropped_prev_cycle: bool = False
    underpredictions: int = 0
    drops: int = 0
    latches: int = 0
    drop_cycles: list = field(default_factory=list)


def jitt_latch(filled: Sequence, ledger: CycleLedger, cycle: Optional[int] = None) -> tuple:
    """Pick the frame to hand to the display this refresh cycle.

    ``filled`` is ordered oldest first. Returns ``(latched, dropped)``; either
    may be ``None``. Two filled frames drop the older, unless the previous
    cycle already dropped one, in which case the older is shown and the delay
    propagates.
    """
    if len(filled) > 2:
        raise InvariantViolation(f"{len(filled)} filled buffers at latch time; pool mismanaged")
    if not filled:
        ledger.dropped_prev_cycle = False
        return None, None
    if len(filled) == 1:
        ledger.dropped_prev_cycle = False
        ledger.latches += 1
        return filled[0], None
    older, newer = filled
    ledger.latches += 1
    if ledger.dropped_prev_cycle:
        ledger.dropped_prev_cycle = False
        return older, None
    ledger.dropped_prev_cycle = True
    ledger.drops += 1
    if cycle is not None:
        ledger.drop_cycles.append(cycle)
    return newer, older


def par_rect(touch: tuple, cfg: ParConfig, display: DisplayConfig) -> DirtyRegion:
    return DirtyRegion.centered(touch[0], touch[1], cfg.rect_w, cfg.rect_h,
                                display.width, display.height)


@dataclass(frozen=True)
class ParDecision:
    in_place: bool
    target_pulse: Optional[int] = None
    reason: str = ""


def par_decide(latest_touch: tuple, predicted_dirty: DirtyRegion, outside_change: bool,
               t_app_pred: int, now: int, display: DisplayConfig, cfg: ParConfig = ParConfig(),
               pending_frames: bool = False) -> ParDecision:
    """Grant an in-place write into the scanned buffer, or fall back to a free one.

    In place requires: no detected change outside the rectangle around the
    touch, the predicted dirty region inside that rectangle, scanout not
    currently inside the rectangle, no newer frame queued for display, and the
    write predicted to finish strictly before scanout next reaches the
    rectangle's top row.
    """
    if outside_change:
        return ParDecision(False, reason="outside_change")
    rect = par_rect(latest_touch, cfg, display)
    if predicted_dirty.full_frame or not predicted_dirty.within(rect):
        return ParDecision(False, reason="dirty_outside_rect")
    if pending_frames:
        return ParDecision(False, reason="frame_pending")
    pulse = display.pulse_floor(now)
    top = pulse + scanout_reach_time(rect.y0, display)
    bottom = pulse + scanout_reach_time(rect.y1, display)
    if top <= now < bottom:
        return ParDecision(False, reason="scanning_rect")
    if now >= top:
        pulse += display.t_sync
        top = pulse + scanout_reach_time(rect.y0, display)
    if now + t_app_pred + cfg.guard < top:
        return ParDecision(True, target_pulse=pulse, reason="granted")
    return ParDecision(False, reason="deadline")


def jep_submit(dirty: DirtyRegion, filled_at: int, display: DisplayConfig) -> tuple:
    """Which refresh shows a just-enough-pixels update.

    Returns ``(pulse, copy_time)``: the in-progress refresh when the fill
    completes strictly before scanout reaches the dirty rows, otherwise the
    next refresh, copied once the current scan has left those rows.
    """
    pulse = display.pulse_floor(filled_at)
    if filled_at < pulse + scanout_reach_time(dirty.y0, display):
        return pulse, filled_at
    return pulse + display.t_sync, max(filled_at, pulse + scanout_reach_time(dirty.y1, display))
