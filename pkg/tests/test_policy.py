import pytest
from hypothesis import given, settings, strategies as st

from i2dpath.domain import DirtyRegion, DisplayConfig, InvariantViolation
from i2dpath.policy import (CycleLedger, ParConfig, Predictor, expected_arrivals, jep_submit,
                            jitt_latch, jitt_trigger_time, par_decide)

from oracles import reach, sample_stdev

CFG = DisplayConfig()
ALT = [4000, 6000] * 16


def test_constant_window_predicts_constant():
    for mode in ("mean", "mean_plus_ksigma", "window_max"):
        assert Predictor(mode, seed=[5000] * 32).predict() == 5000


def test_alternating_window_modes():
    assert Predictor("mean", seed=ALT).predict() == 5000
    assert Predictor("window_max", seed=ALT).predict() == 6000
    expected = round(5000 + sample_stdev(ALT))
    assert expected == 6016
    assert Predictor("mean_plus_ksigma", k=1, seed=ALT).predict() == expected


def test_prior_until_window_full():
    p = Predictor(prior=8000, seed=[5000] * 10)
    assert p.predict() == 8000
    for _ in range(22):
        p.update(5000)
    assert p.predict() == 5000


def test_window_evicts_oldest():
    p = Predictor(seed=[1000] + [5000] * 31)
    p.update(5000)
    assert list(p.window).count(1000) == 0 and len(p.window) == 32


def test_predictor_rejects_bad_inputs():
    with pytest.raises(ValueError):
        Predictor().update(0)
    with pytest.raises(ValueError):
        Predictor(window=33)


@given(st.lists(st.integers(1, 50000), min_size=32, max_size=80),
       st.sampled_from(["mean", "mean_plus_ksigma", "window_max"]))
def test_prediction_positive_and_bounded(values, mode):
    p = Predictor(mode, seed=values)
    assert p.predict() > 0
    if mode == "window_max":
        assert p.predict() == max(values[-32:])


def test_trigger_at_last_arrival_before_deadline():
    arrivals = [k * 8333 for k in range(20)]
    assert jitt_trigger_time(100_000, 4100, 3500, arrivals) == 91_663


def test_trigger_when_pipeline_takes_a_full_period():
    arrivals = [k * 8333 for k in range(20)]
    # deadline 83 333; last arrival at or before it is 10 * 8 333
    assert jitt_trigger_time(100_000, 16_667 - 3500, 3500, arrivals) == 83_330


def test_trigger_falls_back_to_deadline():
    assert jitt_trigger_time(100_000, 4100, 3500, [95_000]) == 92_400


def test_expected_arrival_schedule():
    assert expected_arrivals(0, 8333, 80_000, 100_000) == [83_330, 91_663, 99_996]


def test_latch_drops_older_of_two():
    led = CycleLedger()
    assert jitt_latch(["f7", "f8"], led) == ("f8", "f7")
    assert led.dropped_prev_cycle and led.drops == 1


def test_latch_propagates_after_a_drop():
    led = CycleLedger(dropped_prev_cycle=True)
    assert jitt_latch(["f9", "f10"], led) == ("f9", None)
    assert not led.dropped_prev_cycle


def test_latch_single_and_none():
    led = CycleLedger(dropped_prev_cycle=True)
    assert jitt_latch(["f11"], led) == ("f11", None)
    assert jitt_latch([], led) == (None, None)


def test_latch_more_than_two_is_an_invariant_violation():
    with pytest.raises(InvariantViolation):
        jitt_latch(["a", "b", "c"], CycleLedger())


@settings(max_examples=200)
@given(st.lists(st.integers(0, 2), min_size=1, max_size=200))
def test_never_two_consecutive_drops(filled_counts):
    led = CycleLedger()
    prev_drop = False
    for i, n in enumerate(filled_counts):
        _, dropped = jitt_latch(list(range(n)), led, i)
        assert not (prev_drop and dropped is not None)
        prev_drop = dropped is not None


def _brush(cx, cy, w, h):
    return DirtyRegion(cx - w // 2, cy - h // 2, cx + w // 2, cy + h // 2)


def test_par_grants_when_write_beats_scanout():
    touch = (720, 2000)
    rect_top = reach(1900)
    now = rect_top - 2000 - 3000
    d = par_decide(touch, _brush(720, 2000, 180, 180), False, 3000, now, CFG)
    assert d.in_place and d.target_pulse == 0


def test_par_denies_oversized_dirty_region():
    d = par_decide((720, 2000), _brush(720, 2000, 300, 100), False, 1000, 0, CFG)
    assert not d.in_place and d.reason == "dirty_outside_rect"


def test_par_stops_on_outside_change():
    d = par_decide((720, 2000), _brush(720, 2000, 20, 20), True, 1000, 0, CFG)
    assert not d.in_place and d.reason == "outside_change"


def test_par_deadline_is_strict():
    touch = (720, 2000)
    top = reach(1900)
    assert not par_decide(touch, _brush(720, 2000, 20, 20), False, 1000, top - 1000, CFG).in_place
    assert par_decide(touch, _brush(720, 2000, 20, 20), False, 1000, top - 1001, CFG).in_place
    assert not par_decide(touch, _brush(720, 2000, 20, 20), False, 1000, top - 1001, CFG,
                          ParConfig(guard=1)).in_place


def test_par_targets_next_refresh_after_rect_passed():
    touch = (720, 200)
    now = reach(400) + 10
    d = par_decide(touch, _brush(720, 200, 20, 20), False, 1000, now, CFG)
    assert d.in_place and d.target_pulse == CFG.t_sync


def test_par_denies_while_scanning_rect_or_frame_pending():
    touch = (720, 1000)
    inside = reach(950)
    assert par_decide(touch, _brush(720, 1000, 20, 20), False, 100, inside, CFG).reason == "scanning_rect"
    assert par_decide(touch, _brush(720, 1000, 20, 20), False, 100, 0, CFG,
                      pending_frames=True).reason == "frame_pending"


def test_jep_accepts_before_scanout_reaches_rows():
    dirty = DirtyRegion(0, 2000, 1440, 2100)
    assert reach(2000) == 13031
    assert jep_submit(dirty, 4000, CFG) == (0, 4000)


def test_jep_queues_rows_already_scanned():
    dirty = DirtyRegion(0, 0, 1440, 100)
    pulse, copy = jep_submit(dirty, 4000, CFG)
    assert pulse == CFG.t_sync and copy == 4000


def test_jep_boundary_is_strict():
    dirty = DirtyRegion(0, 2000, 1440, 2100)
    pulse, copy = jep_submit(dirty, reach(2000), CFG)
    assert pulse == CFG.t_sync and copy == reach(2100)
