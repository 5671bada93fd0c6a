"""Latency estimators, aggregate statistics and report writers."""

from __future__ import annotations

import bisect
import csv
import hashlib
import io
import json
import math
import statistics
from typing import Iterable, Optional, Sequence

from .display import scanout_reach_time, sync_fraction_estimate
from .domain import CSV_FIELDS, STAGES, DisplayConfig, LatencyRecord
from .engine import round_half_up
from .input import strokes

MM_PER_INCH = 25.4


def eq1_coarse_latency(t_sync: int, t_app: int, t_out: int, offset: int = 0) -> int:
    """Average latency added by pulse-gated delivery and latching (may be negative)."""
    if min(t_sync, t_app, t_out) <= 0 or offset < 0:
        raise ValueError("t_sync, t_app and t_out must be positive; offset non-negative")
    return math.floor(2.5 * t_sync - (t_app + t_out) - offset)


def indirect_latency(record: LatencyRecord, cfg: DisplayConfig, hw_const: int = 28000) -> tuple:
    """Three-part estimate: input hardware constant, software time, scanout fraction."""
    if record.dropped or not record.complete or record.t_ownership is None:
        raise ValueError(f"record {record.seq}: no externalization")
    part1 = hw_const
    part2 = record.t_ownership - record.t_device
    part3 = sync_fraction_estimate(record.y_drawn, cfg)
    return part1, part2, part3, part1 + part2 + part3


def direct_latency(gap_mm: float, velocity_mm_s: float) -> int:
    """Gap between pen and drawn line head divided by pen speed, in us."""
    if velocity_mm_s <= 0:
        raise ValueError("velocity must be positive")
    return round_half_up(gap_mm / velocity_mm_s * 1e6)


class PenTrack:
    """Piecewise-linear pen position over a trace, with per-stroke speeds."""

    def __init__(self, samples: Sequence, dpi: float):
        self.t = [s.t_physical for s in samples]
        self.y = [s.y for s in samples]
        self.dpi = dpi
        self.strokes = strokes(samples)
        self._starts = [s[0] for s in self.strokes]
        self._speed = []
        for t0, t1, _ in self.strokes:
            y0, y1 = self.y_at(t0), self.y_at(t1)
            mm = abs(y1 - y0) / dpi * MM_PER_INCH
            self._speed.append(mm / ((t1 - t0) / 1e6) if t1 > t0 else 0.0)

    def y_at(self, t: float) -> float:
        i = bisect.bisect_right(self.t, t) - 1
        if i < 0:
            return float(self.y[0])
        if i >= len(self.t) - 1:
            return float(self.y[-1])
        f = (t - self.t[i]) / (self.t[i + 1] - self.t[i])
        return self.y[i] + f * (self.y[i + 1] - self.y[i])

    def stroke_of(self, t: float) -> Optional[int]:
        i = bisect.bisect_right(self._starts, t) - 1
        if i < 0 or t > self.strokes[i][1]:
            return None
        return i

    def speed(self, i: int) -> float:
        return self._speed[i]


def direct_estimates(records: Iterable[LatencyRecord], track: PenTrack, horizon: int = 0) -> list:
    """Camera-style estimate per record: (seq, estimate_us, timestamp_latency_us).

    Records whose touch, predicted point and externalization do not all fall
    inside one monotone stroke are skipped (the gap would fold back).
    """
    out = []
    for r in records:
        if not r.complete:
            continue
        k = track.stroke_of(r.t_physical)
        if k is None or track.stroke_of(r.t_externalized) != k or track.stroke_of(r.t_physical + horizon) != k:
            continue
        v = track.speed(k)
        if v <= 0:
            continue
        gap_px = abs(track.y_at(r.t_externalized) - r.y_drawn)
        out.append((r.seq, direct_latency(gap_px / track.dpi * MM_PER_INCH, v), r.latency))
    return out


def nearest_rank(sorted_values: Sequence, p: float):
    if not sorted_values:
        return None
    k = max(1, math.ceil(p / 100.0 * len(sorted_values)))
    return sorted_values[k - 1]


def _r(x: Optional[float]) -> Optional[float]:
    return None if x is None else round(float(x), 3)


def latency_stats(latencies: Sequence[int]) -> dict:
    vals = sorted(latencies)
    if not vals:
        return {"mean": None, "std": None, "p50": None, "p95": None, "p99": None}
    return {
        "mean": _r(statistics.fmean(vals)),
        "std": _r(statistics.pstdev(vals)) if len(vals) > 1 else 0.0,
        "p50": nearest_rank(vals, 50),
        "p95": nearest_rank(vals, 95),
        "p99": nearest_rank(vals, 99),
    }


def coarse_grain(record: LatencyRecord, cfg: DisplayConfig) -> int:
    """Latency added by waiting for delivery, ownership and refresh start."""
    st = record.stages()
    return (st["wait_delivery"] + st["wait_ownership"] + st["T_disp"]
            - scanout_reach_time(record.y_drawn, cfg))


def summarize(records: Sequence[LatencyRecord], frames: Sequence, duration_us: int,
              cfg: DisplayConfig, extra: Optional[dict] = None) -> dict:
    """Aggregate statistics for one design (or one app overall)."""
    done = [r for r in records if r.complete]
    lat = [r.latency for r in done]
    stages = {s: None for s in STAGES}
    if done:
        per = [r.stages() for r in done]
        stages = {s: _r(statistics.fmean(p[s] for p in per)) for s in STAGES}
    produced = [f for f in frames if f.t_draw_end is not None]
    dropped = sum(1 for f in produced if f.state == "dropped")
    under = sum(1 for f in produced if f.underpredicted)
    torn = sum(1 for f in produced if f.torn)
    in_place = sum(1 for f in produced if f.in_place)
    shown_cycles = {f.shown_at for f in produced if f.shown_at is not None}
    n = len(produced)
    out = {
        "events": len(records),
        "events_completed": len(done),
        "events_dropped_frames": sum(1 for r in done if r.dropped),
        "latency_us": latency_stats(lat),
        "stages_mean_us": stages,
        "coarse_grain_mean_us": _r(statistics.fmean(coarse_grain(r, cfg) for r in done)) if done else None,
        "frames_produced": n,
        "frames_dropped": dropped,
        "drop_rate": _r(dropped / n) if n else None,
        "underprediction_count": under,
        "underprediction_rate": _r(under / n) if n else None,
        "tearing_count": torn,
        "in_place_frames": in_place,
        "displayed_fps": _r(len(shown_cycles) / (duration_us / 1e6)) if duration_us > 0 else None,
    }
    out.update(extra or {})
    return out


def config_digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def records_csv(records: Iterable[LatencyRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in sorted(records, key=lambda r: r.seq):
        w.writerow(r.csv_row())
    return buf.getvalue()
