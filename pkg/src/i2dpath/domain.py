"""Shared value types: touches, events, buffers, dirty regions, display, apps."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .engine import round_half_up, truncated_normal


class InvariantViolation(RuntimeError):
    """A runtime invariant of the simulated pipeline was broken."""


class BufferStateError(InvariantViolation):
    pass


class BufferState(str, enum.Enum):
    FREE = "free"
    BUSY_APP = "busy_app"
    FILLED = "filled"
    BUSY_DISP = "busy_disp"


_LEGAL = {
    (BufferState.FREE, BufferState.BUSY_APP),
    (BufferState.BUSY_APP, BufferState.FILLED),
    (BufferState.FILLED, BufferState.BUSY_DISP),
    (BufferState.BUSY_DISP, BufferState.FREE),
}


def validate_buffer_transition(frm, to, par_write: bool = False, drop: bool = False) -> bool:
    """Accept a legal buffer transition or raise :class:`BufferStateError`.

    ``busy_disp -> busy_disp`` is only legal as a position-aware in-place
    write (``par_write``). ``filled -> free`` is only legal for a frame drop.
    """
    frm, to = BufferState(frm), BufferState(to)
    if (frm, to) in _LEGAL:
        return True
    if par_write and frm is BufferState.BUSY_DISP and to is BufferState.BUSY_DISP:
        return True
    if drop and frm is BufferState.FILLED and to is BufferState.FREE:
        return True
    raise BufferStateError(f"illegal buffer transition {frm.value} -> {to.value}")


@dataclass(frozen=True)
class DirtyRegion:
    """Half-open pixel rectangle [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int
    full_frame: bool = False

    def __post_init__(self):
        if not self.empty and (self.x0 >= self.x1 or self.y0 >= self.y1):
            raise ValueError(f"degenerate dirty region {self}")

    @property
    def empty(self) -> bool:
        return self.x0 == self.x1 and self.y0 == self.y1

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def within(self, other: "DirtyRegion") -> bool:
        return (other.x0 <= self.x0 and self.x1 <= other.x1
                and other.y0 <= self.y0 and self.y1 <= other.y1)

    @classmethod
    def full(cls, width: int, height: int) -> "DirtyRegion":
        return cls(0, 0, width, height, full_frame=True)

    @classmethod
    def centered(cls, cx: int, cy: int, w: int, h: int, width: int, height: int) -> "DirtyRegion":
        """A w x h rectangle centred on (cx, cy), shifted to lie on screen."""
        x0 = min(max(cx - w // 2, 0), max(width - w, 0))
        y0 = min(max(cy - h // 2, 0), max(height - h, 0))
        return cls(x0, y0, min(x0 + w, width), min(y0 + h, height))

    @classmethod
    def brush(cls, points: Sequence[tuple], radius: int, width: int, height: int) -> "DirtyRegion":
        """Bounding box of a stroke through ``points`` inflated by ``radius``."""
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        x0 = max(min(xs) - radius, 0)
        y0 = max(min(ys) - radius, 0)
        x1 = min(max(xs) + radius + 1, width)
        y1 = min(max(ys) + radius + 1, height)
        return cls(x0, y0, x1, y1)


@dataclass(frozen=True)
class DisplayConfig:
    width: int = 1440
    height: int = 2560
    t_sync: int = 16_667
    scan_rate: int = 221_000_000
    # active scanout may overrun t_sync by this fraction (the profiled pixel
    # rate gives 16 680 us for a 16 667 us period)
    overrun_tolerance: float = 0.005

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.t_sync <= 0 or self.scan_rate <= 0:
            raise ValueError("display dimensions, period and scan rate must be positive")
        active = self.width * self.height * 1_000_000 / self.scan_rate
        if active > self.t_sync * (1 + self.overrun_tolerance):
            raise ValueError(
                f"active scanout {active:.0f} us does not fit the refresh period {self.t_sync} us")

    @property
    def active_scan(self) -> int:
        return self.width * self.height * 1_000_000 // self.scan_rate

    def pulse_floor(self, t: int) -> int:
        return (t // self.t_sync) * self.t_sync

    def pulse_ceil(self, t: int) -> int:
        return -(-t // self.t_sync) * self.t_sync


@dataclass(frozen=True)
class TouchSample:
    seq: int
    t_physical: int
    x: int
    y: int
    velocity_est: Optional[tuple] = None


def validate_samples(samples: Sequence[TouchSample], width: int, height: int) -> None:
    prev = None
    for s in samples:
        if not (0 <= s.x < width and 0 <= s.y < height):
            raise ValueError(f"sample {s.seq} at ({s.x}, {s.y}) is off screen")
        if s.t_physical < 0:
            raise ValueError(f"sample {s.seq} has negative time")
        if prev is not None and (s.seq <= prev.seq or s.t_physical <= prev.t_physical):
            raise ValueError(f"sample {s.seq} is not strictly after sample {prev.seq}")
        prev = s


@dataclass
class InputEvent:
    sample: TouchSample
    t_device: int
    app_id: str
    path_tag: Optional[str] = None

    def __post_init__(self):
        if self.t_device < self.sample.t_physical:
            raise ValueError(f"event {self.sample.seq} reaches the device before it happened")

    @property
    def seq(self) -> int:
        return self.sample.seq

    def assign_path(self, tag: str) -> None:
        if self.path_tag is not None and self.path_tag != tag:
            raise InvariantViolation(
                f"event {self.seq} already carries path {self.path_tag!r}, refusing {tag!r}")
        self.path_tag = tag


@dataclass
class GraphicsBuffer:
    id: int
    state: BufferState = BufferState.FREE
    frame_seq: int = -1
    dirty: Optional[DirtyRegion] = None
    fill_start: Optional[int] = None
    fill_end: Optional[int] = None
    source_events: set = field(default_factory=set)
    par_write: bool = False

    def move(self, to: BufferState, par_write: bool = False, drop: bool = False) -> None:
        validate_buffer_transition(self.state, to, par_write=par_write, drop=drop)
        self.state = to
        self.par_write = par_write and to is BufferState.BUSY_DISP


class BufferPool:
    """Fixed pool of graphics buffers owned by one application."""

    def __init__(self, size: int = 3):
        if size < 2:
            raise ValueError("buffer pool needs at least two buffers")
        self.buffers = [GraphicsBuffer(i) for i in range(size)]

    def __len__(self) -> int:
        return len(self.buffers)

    def count(self, state: BufferState) -> int:
        return sum(1 for b in self.buffers if b.state is state)

    def free_buffer(self) -> Optional[GraphicsBuffer]:
        for b in self.buffers:
            if b.state is BufferState.FREE:
                return b
        return None

    def check(self) -> None:
        if self.count(BufferState.BUSY_DISP) > 1:
            raise InvariantViolation("more than one busy_disp buffer for an application")
        total = sum(self.count(s) for s in BufferState)
        if total != len(self.buffers):
            raise InvariantViolation("buffer count not conserved")


@dataclass(frozen=True)
class TAppDist:
    """Distribution of the application's per-frame processing time (us).

    ``mean``/``sigma`` are the moments of the drawn value for every kind,
    including lognormal. ``sequence`` cycles through ``values``; ``overrides``
    pins individual frame indices (for scripted scenarios).
    """

    kind: str = "constant"
    mean: float = 5000.0
    sigma: float = 0.0
    values: tuple = ()
    overrides: tuple = ()  # ((frame_index, t_app), ...)

    def __post_init__(self):
        if self.kind not in ("constant", "truncnormal", "lognormal", "sequence"):
            raise ValueError(f"unknown T_app distribution {self.kind!r}")
        if self.kind == "sequence" and not self.values:
            raise ValueError("sequence distribution needs values")
        if self.mean <= 0 and self.kind != "sequence":
            raise ValueError("T_app mean must be positive")

    def sample(self, rng: np.random.Generator, frame_index: int) -> int:
        for idx, value in self.overrides:
            if idx == frame_index:
                return max(1, int(value))
        if self.kind == "constant":
            x = self.mean
        elif self.kind == "sequence":
            x = self.values[frame_index % len(self.values)]
        elif self.kind == "truncnormal":
            x = truncated_normal(rng, self.mean, self.sigma, lo=1.0)
        else:
            if self.sigma <= 0:
                x = self.mean
            else:
                s2 = math.log(1.0 + (self.sigma / self.mean) ** 2)
                x = rng.lognormal(math.log(self.mean) - s2 / 2, math.sqrt(s2))
        return max(1, round_half_up(x))


@dataclass(frozen=True)
class AppModel:
    app_id: str
    t_app: TAppDist = TAppDist()
    dirty_model: str = "brush"
    brush_radius: int = 8
    outside_change_prob: float = 0.0

    def __post_init__(self):
        if self.dirty_model not in ("brush", "full_frame"):
            raise ValueError(f"unknown dirty model {self.dirty_model!r}")
        if not 0.0 <= self.outside_change_prob <= 1.0:
            raise ValueError("outside_change_prob must be a probability")


CSV_FIELDS = ("seq", "t_physical", "t_device", "t_delivered", "t_draw_start", "t_draw_end",
              "t_ownership", "t_externalized", "path", "frame", "dropped", "torn")

STAGES = ("T_input", "wait_delivery", "T_app", "wait_ownership", "T_out", "T_disp")


@dataclass
class LatencyRecord:
    seq: int
    app_id: str
    t_physical: int
    t_device: int
    y: int
    y_drawn: int
    t_delivered: Optional[int] = None
    t_draw_start: Optional[int] = None
    t_draw_end: Optional[int] = None
    t_ownership: Optional[int] = None
    t_externalized: Optional[int] = None
    path_tag: Optional[str] = None
    frame_seq: Optional[int] = None
    dropped: bool = False
    torn: bool = False
    # not part of the CSV
    transfer: int = 0
    t_refresh: Optional[int] = None
    latch_tag: Optional[str] = None
    x_drawn: Optional[int] = None

    @property
    def complete(self) -> bool:
        return self.t_externalized is not None

    @property
    def latency(self) -> Optional[int]:
        if self.t_externalized is None:
            return None
        return self.t_externalized - self.t_physical

    def stages(self) -> dict:
        """Consecutive stage deltas; they sum exactly to the end-to-end latency."""
        if not self.complete:
            raise ValueError(f"record {self.seq} was never externalized")
        return {
            "T_input": self.t_device - self.t_physical,
            "wait_delivery": self.t_delivered - self.t_device,
            "T_app": self.t_draw_end - self.t_delivered,
            "wait_ownership": self.t_ownership - self.transfer - self.t_draw_end,
            "T_out": self.transfer,
            "T_disp": self.t_externalized - self.t_ownership,
        }

    def check(self) -> None:
        chain = [self.t_physical, self.t_device, self.t_delivered, self.t_draw_start,
                 self.t_draw_end,
                 None if self.t_ownership is None else self.t_ownership - self.transfer,
                 self.t_ownership,
                 self.t_externalized]
        present = [t for t in chain if t is not None]
        if any(b < a for a, b in zip(present, present[1:])):
            raise InvariantViolation(f"record {self.seq} timestamps out of order: {chain}")

    def csv_row(self) -> list:
        def opt(v):
            return "" if v is None else v
        return [self.seq, self.t_physical, self.t_device, opt(self.t_delivered),
                opt(self.t_draw_start), opt(self.t_draw_end), opt(self.t_ownership),
                opt(self.t_externalized), opt(self.path_tag), opt(self.frame_seq),
                int(self.dropped), int(self.torn)]
