"""Sync pulses, top-down scanout timing, composition and tearing detection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import DirtyRegion, DisplayConfig


def scanout_reach_time(y: int, cfg: DisplayConfig) -> int:
    """Offset from the pulse at which scanout reaches row ``y`` (pixel-rate model)."""
    if not 0 <= y <= cfg.height:
        raise ValueError(f"row {y} outside [0, {cfg.height}]")
    return int(y * cfg.width * 1_000_000 // cfg.scan_rate)


def sync_fraction_estimate(y: int, cfg: DisplayConfig) -> int:
    """T_sync * y / H: the row-proportional externalization estimate."""
    if not 0 <= y <= cfg.height:
        raise ValueError(f"row {y} outside [0, {cfg.height}]")
    return cfg.t_sync * y // cfg.height


def externalize(t_pulse: int, y: int, cfg: DisplayConfig) -> int:
    return t_pulse + scanout_reach_time(y, cfg)


def tearing_check(t0: int, t1: int, dirty: DirtyRegion, t_pulse: int, cfg: DisplayConfig) -> bool:
    """True when the write [t0, t1] was in progress while scanout crossed the dirty rows."""
    enter = t_pulse + scanout_reach_time(dirty.y0, cfg)
    leave = t_pulse + scanout_reach_time(dirty.y1, cfg)
    return t1 > enter and t0 < leave


def visible_cycle(t0: int, t1: int, dirty: DirtyRegion, cfg: DisplayConfig) -> tuple:
    """First pulse whose scan shows a write into the scanned buffer, and whether it tore.

    Walks refresh cycles from the one containing ``t0`` until a cycle starts
    reading the dirty rows after the write completed.
    """
    q = cfg.pulse_floor(t0)
    torn = False
    while True:
        if tearing_check(t0, t1, dirty, q, cfg):
            torn = True
        if t1 < q + scanout_reach_time(dirty.y0, cfg):
            return q, torn
        q += cfg.t_sync


def compose(latched: dict, z_order: Optional[list] = None) -> dict:
    """Combine per-app latched frames into one scanout source.

    Composition is free. Where several full-frame apps overlap, the one latest
    in ``z_order`` is on top and the others are hidden.
    """
    z_order = list(z_order or [])
    rank = {app: i for i, app in enumerate(z_order)}
    out = dict(latched)
    full = [a for a, f in latched.items() if f is not None and getattr(f, "dirty", None) is not None
            and f.dirty.full_frame]
    if len(full) > 1:
        top = max(full, key=lambda a: rank.get(a, -1))
        for a in full:
            if a != top:
                out[a] = None
    return out


@dataclass
class AppScanout:
    """Display-side state for one application."""

    latched_for: dict = field(default_factory=dict)   # pulse -> frame
    showing: Optional[object] = None                  # frame whose buffer is busy_disp
    shown_seq: int = -1
    new_content_cycles: set = field(default_factory=set)
    in_display_memory: Optional[np.ndarray] = None


@dataclass
class ScanoutState:
    cfg: DisplayConfig
    cycle_index: int = -1
    t_pulse: int = 0
    apps: dict = field(default_factory=dict)

    def app(self, app_id: str) -> AppScanout:
        if app_id not in self.apps:
            self.apps[app_id] = AppScanout(
                in_display_memory=np.full(self.cfg.height, -1, dtype=np.int64))
        return self.apps[app_id]

    def advance(self, t_pulse: int) -> None:
        if self.cycle_index >= 0 and t_pulse - self.t_pulse != self.cfg.t_sync:
            raise ValueError("pulses must be exactly one period apart")
        self.cycle_index += 1
        self.t_pulse = t_pulse

    def latch(self, app_id: str, pulse: int, frame) -> None:
        st = self.app(app_id)
        if pulse in st.latched_for:
            raise ValueError(f"{app_id}: pulse {pulse} already has a latched frame")
        st.latched_for[pulse] = frame

    def mark_shown(self, app_id: str, frame_seq: int, cycle_pulse: int) -> None:
        st = self.app(app_id)
        if frame_seq < st.shown_seq:
            raise ValueError(f"{app_id}: frame {frame_seq} shown after {st.shown_seq}")
        st.shown_seq = frame_seq
        st.new_content_cycles.add(cycle_pulse)

    def jep_copy(self, app_id: str, dirty: DirtyRegion, frame_seq: int) -> None:
        self.app(app_id).in_display_memory[dirty.y0:dirty.y1] = frame_seq
