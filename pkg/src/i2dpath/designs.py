"""The pluggable path designs.

Each design pairs an event-manager policy (when buffered events reach the
application) with a buffer-manager policy (how filled buffers reach the
display). They drive an ``AppPipeline`` and keep only policy state.
"""

from __future__ import annotations

from typing import Optional

from .display import scanout_reach_time
from .policy import (CycleLedger, JittConfig, ParConfig, Predictor, jep_submit, jitt_latch,
                     par_decide, par_rect)

DESIGN_NAMES = ("legacy", "presto-jitt", "presto-jitt-par", "presto-jitt-jep", "vsync-off")


class PathDesign:
    kind = "base"

    def __init__(self, name: Optional[str] = None):
        self.name = name or self.kind
        self.pipe = None
        self.ledger = CycleLedger()

    def active(self, pipe) -> bool:
        return pipe.design is self

    def attach(self, pipe, now: int) -> None:
        self.pipe = pipe
        if pipe.pending:
            self.on_arrival(pipe, now)

    def detach(self, pipe) -> None:
        pass

    def observe(self, t_app: int) -> None:
        pass

    def on_arrival(self, pipe, now: int) -> None:
        pass

    def on_pulse(self, pipe, pulse: int) -> None:
        pass

    def on_draw_done(self, pipe, frame, now: int) -> None:
        pass

    def on_buffer_freed(self, pipe, now: int) -> None:
        pass

    def stats(self) -> dict:
        return {}


class Legacy(PathDesign):
    """Pulse-gated delivery (optionally offset) and pulse-gated latching, FIFO."""

    kind = "legacy"

    def __init__(self, name: Optional[str] = None, offset: int = 0):
        super().__init__(name)
        if offset < 0:
            raise ValueError("legacy offset must be non-negative")
        self.offset = offset

    def attach(self, pipe, now: int) -> None:
        self.pipe = pipe
        at = pipe.cfg.pulse_floor(now) + self.offset
        if at >= now and self.offset > 0:
            pipe.schedule(at, "legacy.deliver", lambda: self._deliver(pipe, at))

    def on_pulse(self, pipe, pulse: int) -> None:
        if not self.active(pipe):
            return
        if pipe.filled:
            self.ledger.latches += 1
            pipe.latch(pipe.filled[0], pulse + pipe.cfg.t_sync, pulse)
        at = pulse + self.offset
        if self.offset == 0:
            self._deliver(pipe, at)
        else:
            pipe.schedule(at, "legacy.deliver", lambda: self._deliver(pipe, at))

    def _deliver(self, pipe, now: int) -> None:
        if not self.active(pipe):
            return
        pipe.settle(now)
        if pipe.pending and pipe.drawing is None and pipe.pool.free_buffer() is not None:
            pipe.start_frame(pipe.plan_frame(now), now)


class Jitt(PathDesign):
    """Just-in-time trigger: deliver at the last moment the frame still makes a refresh."""

    kind = "presto-jitt"
    uses_latch = True

    def __init__(self, name: Optional[str] = None, jitt: JittConfig = JittConfig(),
                 predictor: Optional[Predictor] = None):
        super().__init__(name)
        self.jitt = jitt
        self.predictor = predictor or Predictor()
        self.want = False
        self._armed: dict = {}
        self._latch_pulses: set = set()
        self.frames = 0
        self.last_refresh: Optional[int] = None

    def observe(self, t_app: int) -> None:
        self.predictor.update(t_app)

    # -- latch ticks ---

    def attach(self, pipe, now: int) -> None:
        self.pipe = pipe
        if self.uses_latch:
            self._schedule_latch(pipe, pipe.cfg.pulse_ceil(now + self.jitt.t_out_pred))
        if pipe.pending:
            self._consider(pipe, now)

    def _schedule_latch(self, pipe, pulse: int) -> None:
        if pulse in self._latch_pulses:
            return
        self._latch_pulses.add(pulse)
        at = pulse - self.jitt.t_out_pred
        pipe.schedule(at, "jitt.latch", lambda: self._latch_tick(pipe, pulse, at))

    def on_pulse(self, pipe, pulse: int) -> None:
        self._latch_pulses.discard(pulse)
        if self.active(pipe) and self.uses_latch:
            self._schedule_latch(pipe, pulse + pipe.cfg.t_sync)

    def _latch_tick(self, pipe, pulse: int, now: int) -> None:
        if not self.active(pipe):
            return
        pipe.settle(now)
        latched, dropped = jitt_latch(list(pipe.filled), self.ledger, pulse)
        if dropped is not None:
            pipe.drop(dropped, latched)
        if latched is not None:
            pipe.latch(latched, pulse, now)
        if dropped is not None:
            self.on_buffer_freed(pipe, now)

    # -- event manager ---

    def on_arrival(self, pipe, now: int) -> None:
        self._consider(pipe, now)

    def _after_last(self, pulse: int, t_sync: int) -> int:
        # one latched frame per refresh: a later batch waits for the following
        # one (in-place and dirty-row updates may share a refresh)
        while self.last_refresh is not None and pulse <= self.last_refresh:
            pulse += t_sync
        return pulse

    def target(self, pipe, now: int) -> tuple:
        """``(kind, refresh, deadline)`` for a delivery decided at ``now``."""
        tp = self.predictor.predict() + self.jitt.t_out_pred
        refresh = self._after_last(pipe.cfg.pulse_ceil(now + tp), pipe.cfg.t_sync)
        return "jitt", refresh, refresh - tp

    def _consider(self, pipe, now: int) -> None:
        if not self.active(pipe) or not pipe.pending:
            return
        target = self.target(pipe, now)
        if pipe.next_expected_arrival(now) > target[2]:
            self._trigger(pipe, now)
        else:
            self._arm(pipe, target[2])

    def _arm(self, pipe, deadline: int) -> None:
        if deadline in self._armed:
            return

        def fire():
            # targets may have moved since arming; decide afresh
            self._armed.pop(deadline, None)
            self._consider(pipe, deadline)

        self._armed[deadline] = pipe.schedule(deadline, "jitt.deadline", fire)

    def _trigger(self, pipe, now: int) -> None:
        pipe.settle(now)
        if pipe.drawing is None and pipe.pool.free_buffer() is not None:
            self.want = False
            self._deliver(pipe, now)
        else:
            self.want = True

    def _deliver(self, pipe, now: int) -> None:
        pred = self.predictor.predict()
        _, refresh, _ = Jitt.target(self, pipe, now)
        self.last_refresh = refresh
        plan = pipe.plan_frame(now, pred)
        self.frames += 1
        pipe.start_frame(plan, now, intended=refresh - self.jitt.t_out_pred)

    def on_draw_done(self, pipe, frame, now: int) -> None:
        if now > frame.intended:
            frame.underpredicted = True
            self.ledger.underpredictions += 1
        self._resume(pipe, now)

    def on_buffer_freed(self, pipe, now: int) -> None:
        self._resume(pipe, now)

    def _resume(self, pipe, now: int) -> None:
        if self.want:
            self.want = False
            self._consider(pipe, now)

    def stats(self) -> dict:
        return {"frames_requested": self.frames}


class JittPar(Jitt):
    """JITT plus position-aware rendering into the buffer being scanned."""

    kind = "presto-jitt-par"

    def __init__(self, name: Optional[str] = None, jitt: JittConfig = JittConfig(),
                 predictor: Optional[Predictor] = None, par: ParConfig = ParConfig(),
                 rng_detect=None):
        super().__init__(name, jitt, predictor)
        self.par = par
        self.rng_detect = rng_detect
        self.requests = 0
        self.grants = 0
        self.hint = True

    def _eligible(self, pipe) -> bool:
        return (self.hint and pipe.app.dirty_model == "brush" and not pipe.filled
                and pipe.scanout.app(pipe.app_id).showing is not None
                and not pipe.scanout.app(pipe.app_id).latched_for)

    def target(self, pipe, now: int) -> tuple:
        if not self._eligible(pipe):
            return super().target(pipe, now)
        rect = par_rect(pipe.latest_touch(), self.par, pipe.cfg)
        lead = scanout_reach_time(rect.y0, pipe.cfg) - self.predictor.predict() - self.par.guard - 1
        pulse = pipe.cfg.pulse_floor(now)
        while pulse + lead < now:
            pulse += pipe.cfg.t_sync
        return "par", pulse, pulse + lead

    def _detect(self, outside: bool) -> bool:
        if not outside:
            return False
        if self.par.detection == "sampled" and self.rng_detect is not None:
            return not (self.rng_detect.random() < self.par.false_negative_prob)
        return True

    def _deliver(self, pipe, now: int) -> None:
        pred = self.predictor.predict()
        plan = pipe.plan_frame(now, pred, detect_fn=self._detect)
        self.requests += 1
        self.frames += 1
        st = pipe.scanout.app(pipe.app_id)
        pending = bool(pipe.filled) or bool(st.latched_for)
        decision = None
        if st.showing is not None and pipe.app.dirty_model == "brush":
            decision = par_decide(plan.touch, plan.dirty, plan.detected_outside, pred, now,
                                  pipe.cfg, self.par, pending_frames=pending)
        if decision is not None and decision.in_place:
            self.grants += 1
            self.hint = True
            rect = par_rect(plan.touch, self.par, pipe.cfg)
            top = decision.target_pulse + scanout_reach_time(rect.y0, pipe.cfg)
            pipe.start_frame(plan, now, in_place=True, intended=top)
            return
        self.hint = decision is not None and decision.reason not in ("outside_change", "dirty_outside_rect")
        _, refresh, _ = Jitt.target(self, pipe, now)
        self.last_refresh = refresh
        pipe.start_frame(plan, now, intended=refresh - self.jitt.t_out_pred)

    def on_draw_done(self, pipe, frame, now: int) -> None:
        if not frame.in_place:
            return super().on_draw_done(pipe, frame, now)
        if now >= frame.intended:
            frame.underpredicted = True
            self.ledger.underpredictions += 1
        pipe.finish_in_place(frame, now)
        self._resume(pipe, now)

    def stats(self) -> dict:
        rate = self.grants / self.requests if self.requests else None
        return {"frames_requested": self.frames, "par_requests": self.requests,
                "par_grants": self.grants, "par_grant_rate": rate}


class JittJep(Jitt):
    """Idealized just-enough-pixels: the display copies only dirty rows, just in time."""

    kind = "presto-jitt-jep"
    uses_latch = False

    def target(self, pipe, now: int) -> tuple:
        dirty = pipe.predicted_dirty()
        lead = scanout_reach_time(dirty.y0, pipe.cfg) - self.predictor.predict() - 1
        pulse = pipe.cfg.pulse_floor(now)
        while pulse + lead < now:
            pulse += pipe.cfg.t_sync
        return "jep", pulse, pulse + lead

    def _deliver(self, pipe, now: int) -> None:
        _, pulse, _ = self.target(pipe, now)
        plan = pipe.plan_frame(now, self.predictor.predict())
        self.frames += 1
        pipe.start_frame(plan, now, intended=pulse)

    def on_draw_done(self, pipe, frame, now: int) -> None:
        pulse, t_copy = jep_submit(frame.dirty, now, pipe.cfg)
        if pulse > frame.intended:
            frame.underpredicted = True
            self.ledger.underpredictions += 1
        if t_copy == now:
            pipe.jep_copy(frame, pulse, t_copy)
        else:
            pipe.schedule(t_copy, "jep.copy", lambda: self._copy(pipe, frame, pulse, t_copy))
        self._resume(pipe, now)

    def _copy(self, pipe, frame, pulse: int, t_copy: int) -> None:
        pipe.jep_copy(frame, pulse, t_copy)
        self.on_buffer_freed(pipe, t_copy)
        pipe.maybe_activate(t_copy)


class VsyncOff(PathDesign):
    """Deliver on arrival, swap on fill completion; pulses are ignored."""

    kind = "vsync-off"

    def attach(self, pipe, now: int) -> None:
        self.pipe = pipe
        self._try(pipe, now)

    def on_arrival(self, pipe, now: int) -> None:
        self._try(pipe, now)

    def _try(self, pipe, now: int) -> None:
        if (self.active(pipe) and pipe.pending and pipe.drawing is None
                and pipe.pool.free_buffer() is not None):
            pipe.start_frame(pipe.plan_frame(now), now)

    def on_draw_done(self, pipe, frame, now: int) -> None:
        pipe.swap_now(frame, now)
        self._try(pipe, now)

    def on_buffer_freed(self, pipe, now: int) -> None:
        self._try(pipe, now)
