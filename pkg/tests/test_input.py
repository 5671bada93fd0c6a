import numpy as np
import pytest
from hypothesis import given, strategies as st

from i2dpath.domain import TouchSample
from i2dpath.engine import random_stream
from i2dpath.input import (InputHardwareModel, TraceError, apply_input_hardware, device_times,
                           dump_trace, gen_linear_trace, load_trace, parse_trace, predict_touch,
                           px_per_second, strokes)

from oracles import px_per_s


def test_full_protocol_trace_has_18000_samples():
    s = gen_linear_trace(150, 68, 12, 493, 120, random_stream(0, "trace"))
    assert len(s) == 18000


def test_one_second_trace_spacing():
    s = gen_linear_trace(1, 68, 0, 493, 120, random_stream(0, "trace"))
    assert len(s) == 120
    assert {b.t_physical - a.t_physical for a, b in zip(s, s[1:])} == {8333}
    assert {p.x for p in s} == {720}


def test_speed_to_pixels_per_sample():
    assert px_per_second(68, 493) == pytest.approx(px_per_s(68, 493))
    assert round(px_per_second(68, 493)) == 1320
    s = gen_linear_trace(1, 68, 0, 493, 120, random_stream(0, "trace"))
    assert s[1].y - s[0].y == 11


def test_sweeps_reverse_at_edges():
    s = gen_linear_trace(10, 68, 12, 493, 120, random_stream(3, "trace"))
    assert all(0 <= p.y < 2560 for p in s)
    assert len(strokes(s)) >= 4


def test_trace_rejects_bad_dpi():
    with pytest.raises(ValueError):
        gen_linear_trace(1, 68, 12, 0)


def test_parse_minimal_trace():
    s = parse_trace("t_us,x,y\n0,720,0\n8333,720,11")
    assert [(p.t_physical, p.y) for p in s] == [(0, 0), (8333, 11)]


def test_parse_repeated_timestamp_reports_line():
    with pytest.raises(TraceError, match="line 3"):
        parse_trace("t_us,x,y\n100,1,1\n100,1,2\n")


def test_parse_out_of_bounds_row():
    with pytest.raises(TraceError):
        parse_trace("t_us,x,y\n0,720,2560\n")


def test_trace_round_trip(tmp_path):
    s = gen_linear_trace(2, rng=random_stream(1, "trace"))
    p = tmp_path / "t.csv"
    p.write_text(dump_trace(s))
    back = load_trace(p)
    assert [(a.t_physical, a.x, a.y) for a in back] == [(a.t_physical, a.x, a.y) for a in s]


def test_hardware_latency_constant():
    s = [TouchSample(0, 0, 1, 1), TouchSample(1, 8333, 1, 2)]
    ev = apply_input_hardware(s, InputHardwareModel(120, 28000, 0), random_stream(0, "hw"))
    assert [e.t_device for e in ev] == [28000, 36333]


def test_hardware_latency_zero_is_identity():
    s = [TouchSample(0, 0, 1, 1), TouchSample(1, 8333, 1, 2)]
    ev = apply_input_hardware(s, InputHardwareModel(120, 0, 0), random_stream(0, "hw"))
    assert [e.t_device for e in ev] == [0, 8333]


def test_device_times_clamp_preserves_order():
    # 28 500 then 27 400 at 8 333 spacing does not collide; force a collision
    assert device_times([0, 8333], [28500, 27400]) == [28500, 35733]
    assert device_times([0, 100], [28500, 27400]) == [28500, 28501]


@given(st.integers(0, 2**31), st.floats(0, 3000))
def test_hardware_preserves_count_and_order(seed, sigma):
    s = gen_linear_trace(0.5, rng=random_stream(seed, "trace"))
    ev = apply_input_hardware(s, InputHardwareModel(120, 28000, sigma), random_stream(seed, "hw"))
    assert len(ev) == len(s)
    t = [e.t_device for e in ev]
    assert all(b > a for a, b in zip(t, t[1:]))
    assert all(e.t_device >= e.sample.t_physical for e in ev)


def test_prediction_extrapolates_linearly():
    h = [TouchSample(0, 0, 720, 100), TouchSample(1, 8333, 720, 111)]
    assert predict_touch(h, 16667) == (720, 133)
    assert predict_touch(h, 0) == (720, 111)


def test_prediction_stationary_and_single_sample():
    h = [TouchSample(0, 0, 5, 5), TouchSample(1, 8333, 5, 5)]
    assert predict_touch(h, 30000) == (5, 5)
    assert predict_touch(h[:1], 30000) == (5, 5)


def test_prediction_clamps_to_screen():
    h = [TouchSample(0, 0, 720, 2500), TouchSample(1, 8333, 720, 2550)]
    assert predict_touch(h, 32000, (1440, 2560)) == (720, 2559)


@given(st.integers(-200, 200), st.integers(0, 32000))
def test_constant_velocity_prediction_is_exact(v_px, horizon):
    # velocity chosen so positions are integral at every multiple of the period
    period = 8000
    h = [TouchSample(0, 0, 0, 1000), TouchSample(1, period, 0, 1000 + v_px)]
    truth = 1000 + v_px + v_px * horizon / period
    assert predict_touch(h, horizon)[1] == pytest.approx(truth, abs=0.5)
