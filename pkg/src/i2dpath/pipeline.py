"""Per-application pipeline: event buffering, drawing, buffer hand-off.

The pipeline owns the mechanics shared by every path design (records,
frames, the buffer pool, display hand-off and path switching). The active
design decides *when* events are delivered and *how* filled buffers reach
the display.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .display import ScanoutState, scanout_reach_time, tearing_check, visible_cycle
from .domain import (AppModel, BufferPool, BufferState, DirtyRegion, DisplayConfig,
                     GraphicsBuffer, InputEvent, InvariantViolation, LatencyRecord)
from .input import predict_touch


@dataclass(eq=False)
class Frame:
    seq: int
    app_id: str
    design: object
    records: list
    buffer: GraphicsBuffer
    t_delivered: int
    t_app: int
    t_app_pred: int
    dirty: DirtyRegion
    actual_dirty: DirtyRegion
    touch: tuple
    outside_change: bool = False
    intended: Optional[int] = None
    in_place: bool = False
    state: str = "drawing"
    t_draw_end: Optional[int] = None
    underpredicted: bool = False
    torn: bool = False
    attached: list = field(default_factory=list)
    latch_tag: Optional[str] = None
    shown_at: Optional[int] = None

    @property
    def tag(self) -> str:
        return self.design.name


@dataclass
class FramePlan:
    events: list
    records: list
    dirty: DirtyRegion
    actual_dirty: DirtyRegion
    touch: tuple
    outside_change: bool
    detected_outside: bool
    t_app: int
    t_app_pred: int


@dataclass
class SwitchTicket:
    app_id: str
    from_path: str
    to_path: str
    t_requested: int
    t_completed: Optional[int] = None
    active: bool = False

    @property
    def delay(self) -> Optional[int]:
        return None if self.t_completed is None else self.t_completed - self.t_requested


class AppPipeline:
    def __init__(self, sim, app: AppModel, events: list, design, *, pool_size: int = 3,
                 t_out: int = 3500, horizon: int = 0, sample_period: int = 8333,
                 rng_tapp: np.random.Generator, rng_outside: np.random.Generator,
                 on_switch_complete=None):
        self.sim = sim
        self.engine = sim.engine
        self.cfg: DisplayConfig = sim.display_cfg
        self.scanout: ScanoutState = sim.scanout
        self.app = app
        self.app_id = app.app_id
        self.events = events
        self.pool = BufferPool(pool_size)
        self.t_out = t_out
        self.horizon = horizon
        self.rng_tapp = rng_tapp
        self.rng_outside = rng_outside
        self.on_switch_complete = on_switch_complete

        self.records: dict = {}
        self.frames: list = []
        self.pending: list = []
        self.held: list = []
        self.filled: list = []
        self.inflight: set = set()
        self.drawing: Optional[Frame] = None
        self._draw_handle = None
        self.history: list = []
        self.last_point: Optional[tuple] = None
        self.last_arrival: Optional[int] = None
        self.gap_est: float = float(sample_period)
        self.frame_index = 0
        self.design = design
        self.designs_used = [design]
        self.switch = None
        self.awaiting_first: Optional[SwitchTicket] = None
        self.tickets: list = []
        self._next = 0

    # -- engine glue -------------------------------------------------------

    def schedule(self, at: int, tag: str, fn):
        return self.engine.schedule(at, f"{self.app_id}:{tag}", lambda _: fn())

    def start(self) -> None:
        self.design.attach(self, self.engine.now)
        self._schedule_next_arrival()

    def _schedule_next_arrival(self) -> None:
        if self._next < len(self.events):
            ev = self.events[self._next]
            self._next += 1
            self.engine.schedule(ev.t_device, f"{self.app_id}:arrival", self._on_arrival, ev)

    def _on_arrival(self, ev: InputEvent) -> None:
        now = self.engine.now
        s = ev.sample
        self.history = (self.history + [s])[-2:]
        drawn = predict_touch(self.history, self.horizon, (self.cfg.width, self.cfg.height))
        self.records[s.seq] = LatencyRecord(s.seq, self.app_id, s.t_physical, ev.t_device,
                                            s.y, drawn[1])
        self.records[s.seq].x_drawn = drawn[0]
        if self.last_arrival is not None:
            self.gap_est = 0.9 * self.gap_est + 0.1 * (now - self.last_arrival)
        self.last_arrival = now
        (self.held if self.switch is not None else self.pending).append(ev)
        self._schedule_next_arrival()
        self.design.on_arrival(self, now)

    def next_expected_arrival(self, now: int) -> float:
        if self.last_arrival is None:
            return now + self.gap_est
        t = self.last_arrival + self.gap_est
        while t <= now:
            t += self.gap_est
        return t

    def latest_touch(self) -> tuple:
        s = self.pending[-1].sample if self.pending else self.history[-1]
        return s.x, s.y

    # -- frames ------------------------------------------------------------

    def _drawn_points(self, events) -> list:
        pts = [(self.records[e.seq].x_drawn, self.records[e.seq].y_drawn) for e in events]
        return ([self.last_point] if self.last_point else []) + pts

    def predicted_dirty(self) -> DirtyRegion:
        if self.app.dirty_model == "full_frame" or not self.pending:
            return DirtyRegion.full(self.cfg.width, self.cfg.height)
        return DirtyRegion.brush(self._drawn_points(self.pending), self.app.brush_radius,
                                 self.cfg.width, self.cfg.height)

    def plan_frame(self, now: int, t_app_pred: int = 0, detect_fn=None) -> FramePlan:
        """Take every buffered event for one frame and draw its random attributes."""
        if not self.pending:
            raise InvariantViolation(f"{self.app_id}: delivery with no buffered events")
        events, self.pending = self.pending, []
        dirty = self.predicted_dirty_for(events)
        touch = (events[-1].sample.x, events[-1].sample.y)
        outside = bool(self.rng_outside.random() < self.app.outside_change_prob)
        detected = detect_fn(outside) if detect_fn else outside
        t_app = self.app.t_app.sample(self.rng_tapp, self.frame_index)
        self.frame_index += 1
        full = DirtyRegion.full(self.cfg.width, self.cfg.height)
        actual = full if outside else dirty
        pts = self._drawn_points(events)
        self.last_point = pts[-1]
        records = [self.records[e.seq] for e in events]
        return FramePlan(events, records, dirty, actual, touch, outside, detected, t_app, t_app_pred)

    def predicted_dirty_for(self, events) -> DirtyRegion:
        if self.app.dirty_model == "full_frame":
            return DirtyRegion.full(self.cfg.width, self.cfg.height)
        return DirtyRegion.brush(self._drawn_points(events), self.app.brush_radius,
                                 self.cfg.width, self.cfg.height)

    def start_frame(self, plan: FramePlan, now: int, *, in_place: bool = False,
                    intended: Optional[int] = None) -> Frame:
        if self.drawing is not None:
            raise InvariantViolation(f"{self.app_id}: application already drawing")
        tag = self.design.name
        if in_place:
            showing = self.scanout.app(self.app_id).showing
            if showing is None:
                raise InvariantViolation(f"{self.app_id}: in-place write with nothing on screen")
            buf = showing.buffer
            buf.move(BufferState.BUSY_DISP, par_write=True)
        else:
            buf = self.pool.free_buffer()
            if buf is None:
                raise InvariantViolation(f"{self.app_id}: no free buffer for delivery")
            buf.move(BufferState.BUSY_APP)
        seq = len(self.frames)
        buf.frame_seq = seq
        buf.dirty = plan.actual_dirty
        buf.fill_start = now
        buf.fill_end = None
        buf.source_events = {e.seq for e in plan.events}
        for e, r in zip(plan.events, plan.records):
            e.assign_path(tag)
            r.path_tag = tag
            r.t_delivered = now
            r.t_draw_start = now
            r.frame_seq = seq
        frame = Frame(seq, self.app_id, self.design, plan.records, buf, now, plan.t_app,
                      plan.t_app_pred, plan.dirty, plan.actual_dirty, plan.touch,
                      outside_change=plan.outside_change, intended=intended, in_place=in_place)
        self.frames.append(frame)
        self.inflight.add(frame)
        self.drawing = frame
        self._draw_handle = self.schedule(now + plan.t_app, "draw_done", lambda: self._draw_done(frame))
        self.pool.check()
        return frame

    def settle(self, now: int) -> None:
        """Complete a draw ending at or before ``now`` ahead of same-instant decisions."""
        f = self.drawing
        if f is not None and f.t_delivered + f.t_app <= now:
            self._draw_handle.cancel()
            self._draw_done(f)

    def _draw_done(self, frame: Frame) -> None:
        if self.drawing is not frame:
            return
        t1 = frame.t_delivered + frame.t_app
        frame.t_draw_end = t1
        frame.buffer.fill_end = t1
        for r in frame.records:
            r.t_draw_end = t1
        self.drawing = None
        frame.design.observe(frame.t_app)
        if frame.in_place:
            frame.buffer.par_write = False
        else:
            frame.buffer.move(BufferState.FILLED)
            frame.state = "filled"
            self.filled.append(frame)
        self.pool.check()
        frame.design.on_draw_done(self, frame, t1)
        self.maybe_activate(t1)

    # -- hand-off to the display ---------------------------------------------

    def _hand_over(self, frame: Frame, t: int) -> None:
        frame.latch_tag = self.design.name
        for r in frame.records + frame.attached:
            if r.latch_tag is None:
                r.latch_tag = frame.latch_tag
        if self.awaiting_first is not None and frame.tag == self.awaiting_first.to_path:
            self._complete(self.awaiting_first, t)
            self.awaiting_first = None

    def latch(self, frame: Frame, pulse: int, latch_time: int) -> None:
        """Transfer ``frame`` to the display, to be scanned from ``pulse``."""
        self.filled.remove(frame)
        self._supersede_latched(frame, only=pulse)
        frame.state = "latched"
        t_own = min(latch_time + self.t_out, pulse)
        for r in frame.records + frame.attached:
            r.t_ownership = t_own
            r.transfer = t_own - latch_time
        self.scanout.latch(self.app_id, pulse, frame)
        self._hand_over(frame, latch_time)

    def drop(self, frame: Frame, replaced_by: Frame) -> None:
        self.filled.remove(frame)
        frame.latch_tag = self.design.name
        for r in frame.records + frame.attached:
            if r.latch_tag is None:
                r.latch_tag = frame.latch_tag
        self._discard(frame, replaced_by)

    def _discard(self, frame: Frame, replaced_by: Frame) -> None:
        frame.state = "dropped"
        frame.buffer.move(BufferState.FREE, drop=True)
        self.inflight.discard(frame)
        for r in frame.records + frame.attached:
            r.dropped = True
        replaced_by.attached.extend(frame.records + frame.attached)
        frame.attached = []

    def _supersede_latched(self, newer: Frame, only: Optional[int] = None) -> None:
        """Discard frames latched but not yet scanned that ``newer`` overtakes.

        Only happens right after a path switch, when the new design hands a
        frame to the display before the old design's last frame was shown.
        """
        st = self.scanout.app(self.app_id)
        for pulse in sorted(st.latched_for):
            if only is None or pulse == only:
                self._discard(st.latched_for.pop(pulse), newer)

    def _externalize(self, frame: Frame, cycle_of) -> None:
        first = None
        for r in frame.records + frame.attached:
            q = cycle_of(r)
            r.t_refresh = q
            r.t_externalized = q + scanout_reach_time(r.y_drawn, self.cfg)
            first = q if first is None else min(first, q)
        frame.shown_at = first
        if first is not None:
            self.scanout.mark_shown(self.app_id, frame.seq, first)

    def on_pulse(self, pulse: int) -> None:
        self.settle(pulse)
        st = self.scanout.app(self.app_id)
        frame = st.latched_for.pop(pulse, None)
        freed = False
        if frame is not None:
            if st.showing is not None and st.showing.buffer is not frame.buffer:
                st.showing.buffer.move(BufferState.FREE)
                freed = True
            frame.buffer.move(BufferState.BUSY_DISP)
            st.showing = frame
            frame.state = "shown"
            self.inflight.discard(frame)
            self._externalize(frame, lambda r: pulse)
            self.pool.check()
        self.design.on_pulse(self, pulse)
        if freed:
            self.design.on_buffer_freed(self, pulse)
        self.maybe_activate(pulse)

    def finish_in_place(self, frame: Frame, t1: int) -> None:
        q, torn = visible_cycle(frame.t_delivered, t1, frame.actual_dirty, self.cfg)
        frame.torn = torn
        st = self.scanout.app(self.app_id)
        st.showing = frame
        frame.state = "shown"
        self.inflight.discard(frame)
        for r in frame.records:
            r.t_ownership = t1
            r.transfer = 0
            r.torn = torn
        self._externalize(frame, lambda r: q)
        self._hand_over(frame, t1)

    def jep_copy(self, frame: Frame, pulse: int, t_copy: int) -> None:
        if frame in self.filled:
            self.filled.remove(frame)
        st = self.scanout.app(self.app_id)
        self._supersede_latched(frame)
        if st.showing is not None:
            # the panel now reads from its own memory; release the scanned buffer
            st.showing.buffer.move(BufferState.FREE)
            st.showing = None
        frame.buffer.move(BufferState.BUSY_DISP)
        self.pool.check()
        self.scanout.jep_copy(self.app_id, frame.dirty, frame.seq)
        frame.buffer.move(BufferState.FREE)
        frame.state = "shown"
        self.inflight.discard(frame)
        for r in frame.records + frame.attached:
            r.t_ownership = t_copy
            r.transfer = 0
        self._externalize(frame, lambda r: pulse)
        self._hand_over(frame, t_copy)

    def swap_now(self, frame: Frame, t1: int) -> None:
        """Vsync-off swap at fill completion, mid-scan if need be."""
        self.filled.remove(frame)
        self._supersede_latched(frame)
        st = self.scanout.app(self.app_id)
        if st.showing is not None and st.showing.buffer is not frame.buffer:
            st.showing.buffer.move(BufferState.FREE)
        frame.buffer.move(BufferState.BUSY_DISP)
        st.showing = frame
        self.pool.check()
        pulse = self.cfg.pulse_floor(t1)
        frame.torn = tearing_check(t1, t1, frame.actual_dirty, pulse, self.cfg)
        frame.state = "shown"
        self.inflight.discard(frame)
        for r in frame.records + frame.attached:
            r.t_ownership = t1
            r.transfer = 0
            r.torn = frame.torn

        def cycle_of(r):
            return pulse if t1 < pulse + scanout_reach_time(r.y_drawn, self.cfg) else pulse + self.cfg.t_sync

        self._externalize(frame, cycle_of)
        self._hand_over(frame, t1)

    # -- path switching ----------------------------------------------------

    def drained(self) -> bool:
        """Every old-path frame has been handed to the display or dropped."""
        return not self.pending and self.drawing is None and not self.filled

    def idle(self) -> bool:
        return self.drained() and not self.held

    def begin_switch(self, design, ticket: SwitchTicket, now: int) -> None:
        ticket.active = True
        self.tickets.append(ticket)
        if self.idle():
            self._activate(design, now)
            self._complete(ticket, now)
            return
        self.switch = (design, ticket)
        self.maybe_activate(now)

    def maybe_activate(self, now: int) -> None:
        if self.switch is None:
            return
        if not self.drained():
            return
        design, ticket = self.switch
        self.switch = None
        self.pending, self.held = self.held, []
        if self.pending:
            self.awaiting_first = ticket
        self._activate(design, now)
        if not self.pending and self.awaiting_first is not ticket:
            self._complete(ticket, now)

    def _activate(self, design, now: int) -> None:
        self.design.detach(self)
        self.design = design
        self.designs_used.append(design)
        design.attach(self, now)

    def _complete(self, ticket: SwitchTicket, t: int) -> None:
        ticket.t_completed = t
        ticket.active = False
        if self.on_switch_complete is not None:
            self.on_switch_complete(ticket)
