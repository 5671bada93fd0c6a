"""Touch traces, the input-hardware latency model and touch prediction."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .domain import InputEvent, TouchSample
from .engine import period_us, round_half_up, truncated_normal

MM_PER_INCH = 25.4
TRACE_HEADER = ("t_us", "x", "y")


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class InputHardwareModel:
    sample_rate: float = 120.0
    hw_latency_mean: int = 28_000
    hw_latency_sigma: int = 500

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        if self.hw_latency_mean < 0 or self.hw_latency_sigma < 0:
            raise ValueError("hardware latency parameters must be non-negative")

    @property
    def sample_period(self) -> int:
        return period_us(self.sample_rate)


def px_per_second(speed_mm_s: float, dpi: float) -> float:
    return speed_mm_s / MM_PER_INCH * dpi


def gen_linear_trace(duration_s: float, speed: float = 68.0, speed_sigma: float = 12.0,
                     dpi: float = 493.0, sample_rate: float = 120.0,
                     rng: Optional[np.random.Generator] = None,
                     width: int = 1440, height: int = 2560) -> list[TouchSample]:
    """Vertical pen sweeps between the top and bottom edge, portrait.

    Sampling is continuous at the sample period; each stroke draws its own
    speed from a truncated normal around ``speed`` (mm/s). x stays mid-screen.
    """
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    if speed <= 0:
        raise ValueError("speed must be positive")
    if dpi <= 0:
        raise ValueError("dpi must be positive")
    if rng is None:
        rng = np.random.default_rng(0)
    period = period_us(sample_rate)
    n = round_half_up(duration_s * sample_rate)
    lo = max(speed - 3 * speed_sigma, speed * 0.1)

    def stroke_speed() -> float:
        return px_per_second(truncated_normal(rng, speed, speed_sigma, lo, speed + 3 * speed_sigma), dpi)

    x = width // 2
    bottom = height - 1
    pos, direction, v = 0.0, 1, stroke_speed()
    out = []
    for k in range(n):
        out.append(TouchSample(k, k * period, x, min(max(round_half_up(pos), 0), bottom),
                               (0.0, direction * v)))
        pos += direction * v * period / 1_000_000
        while pos > bottom or pos < 0:
            if pos > bottom:
                pos, direction = 2 * bottom - pos, -1
            else:
                pos, direction = -pos, 1
            v = stroke_speed()
    return out


def write_trace(samples: Iterable[TouchSample], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(dump_trace(samples))


def dump_trace(samples: Iterable[TouchSample]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for s in samples:
        w.writerow((s.t_physical, s.x, s.y))
    return buf.getvalue()


def parse_trace(text: str, width: int = 1440, height: int = 2560) -> list[TouchSample]:
    lines = text.splitlines()
    if not lines or tuple(c.strip() for c in lines[0].split(",")) != TRACE_HEADER:
        raise TraceError("line 1: expected header 't_us,x,y'")
    samples = []
    prev_t = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise TraceError(f"line {lineno}: expected 3 columns, got {len(parts)}")
        try:
            t, x, y = (int(p) for p in parts)
        except ValueError:
            raise TraceError(f"line {lineno}: non-integer field") from None
        if t < 0 or (prev_t is not None and t <= prev_t):
            raise TraceError(f"line {lineno}: timestamp {t} is not strictly increasing")
        if not (0 <= x < width and 0 <= y < height):
            raise TraceError(f"line {lineno}: ({x}, {y}) outside {width}x{height}")
        samples.append(TouchSample(len(samples), t, x, y))
        prev_t = t
    return samples


def load_trace(path, width: int = 1440, height: int = 2560) -> list[TouchSample]:
    return parse_trace(Path(path).read_text(), width, height)


def device_times(t_physical: Sequence[int], latencies: Sequence[int]) -> list[int]:
    """Arrival times with delivery order enforced: each strictly after the last."""
    out = []
    for t, lat in zip(t_physical, latencies):
        arrival = t + lat
        if out and arrival <= out[-1]:
            arrival = out[-1] + 1
        out.append(arrival)
    return out


def draw_hw_latencies(model: InputHardwareModel, n: int, rng: np.random.Generator) -> list[int]:
    mu, sd = model.hw_latency_mean, model.hw_latency_sigma
    lo = max(mu - 3 * sd, 0)
    return [max(0, round_half_up(truncated_normal(rng, mu, sd, lo, mu + 3 * sd))) for _ in range(n)]


def apply_input_hardware(samples: Sequence[TouchSample], model: InputHardwareModel,
                         rng: np.random.Generator, app_id: str = "app") -> list[InputEvent]:
    lat = draw_hw_latencies(model, len(samples), rng)
    arrivals = device_times([s.t_physical for s in samples], lat)
    return [InputEvent(s, t, app_id) for s, t in zip(samples, arrivals)]


def predict_touch(history: Sequence[TouchSample], horizon: int,
                  bounds: Optional[tuple] = None) -> tuple:
    """Two-point linear extrapolation ``horizon`` us past the newest sample.

    With fewer than two samples the last known position is returned.
    """
    if not history:
        raise ValueError("empty touch history")
    last = history[-1]
    if len(history) < 2 or horizon == 0:
        x, y = last.x, last.y
    else:
        prev = history[-2]
        dt = last.t_physical - prev.t_physical
        x = round_half_up(last.x + (last.x - prev.x) / dt * horizon)
        y = round_half_up(last.y + (last.y - prev.y) / dt * horizon)
    if bounds is not None:
        x = min(max(x, 0), bounds[0] - 1)
        y = min(max(y, 0), bounds[1] - 1)
    return x, y


def strokes(samples: Sequence[TouchSample]) -> list[tuple]:
    """Split a trace into monotone vertical strokes: ``(t_start, t_end, direction)``."""
    if len(samples) < 2:
        return []
    out = []
    start = samples[0].t_physical
    direction = 0
    for a, b in zip(samples, samples[1:]):
        d = (b.y > a.y) - (b.y < a.y)
        if d == 0:
            continue
        if direction == 0:
            direction = d
        elif d != direction:
            out.append((start, a.t_physical, direction))
            start, direction = a.t_physical, d
    out.append((start, samples[-1].t_physical, direction))
    return out
