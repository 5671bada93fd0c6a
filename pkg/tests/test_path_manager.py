import pytest

from i2dpath.designs import Legacy
from i2dpath.path_manager import PathError, PathRegistry, audit_path_integrity

from scenarios import config, records, simulate


def _registry(default="legacy"):
    reg = PathRegistry(default=default)
    reg.register_path("legacy", lambda app: Legacy())
    reg.register_path("presto-jitt", lambda app: Legacy("presto-jitt"))
    return reg


def test_register_and_resolve():
    reg = _registry()
    assert reg.resolve("presto-jitt") == "presto-jitt"
    assert reg.resolve("unknown") == "legacy"


def test_duplicate_registration_fails():
    reg = _registry()
    with pytest.raises(PathError):
        reg.register_path("legacy", lambda app: Legacy())


def test_no_default_is_an_error():
    reg = _registry(default=None)
    with pytest.raises(PathError):
        reg.resolve("nope")


def _switch_cfg(switches, duration_s=3.0, **kw):
    return config("legacy", duration_s, switches=switches, **kw)


def test_bind_at_launch_and_rebind():
    _, sim = simulate(config("legacy", 0.2))
    assert sim.manager.bindings["app"].current_path == "legacy"
    with pytest.raises(PathError):
        sim.manager.bind_at_launch("app", "presto-jitt")


def test_missing_preference_uses_default():
    _, sim = simulate(config("does-not-exist", 0.2))
    assert sim.manager.bindings["app"].current_path == "legacy"


def test_idle_switch_completes_immediately():
    # input stops at 0.5 s; by 1.0 s nothing is in flight
    rep, sim = simulate(config("legacy", 0.5, switches=[{"t_us": 600_000, "app_id": "app", "path": "presto-jitt"}]))
    t = sim.manager.tickets[0]
    assert t.delay == 0 and sim.manager.bindings["app"].current_path == "presto-jitt"


def test_active_switch_bounded_and_tagged():
    rep, sim = simulate(_switch_cfg([{"t_us": 1_000_003, "app_id": "app", "path": "presto-jitt"}]))
    t = sim.manager.tickets[0]
    assert 0 < t.delay <= 3 * 16667 + 8333
    recs = records(sim)
    before = [r for r in recs if r.t_device < 1_000_003 and r.path_tag]
    after = [r for r in recs if r.t_delivered and r.t_delivered > t.t_completed]
    assert {r.path_tag for r in before} == {"legacy"}
    assert {r.path_tag for r in after} == {"presto-jitt"}
    assert audit_path_integrity(recs) == 0


def test_overlapping_switches_are_queued_fifo():
    sw = [{"t_us": 1_000_000, "app_id": "app", "path": "presto-jitt"},
          {"t_us": 1_000_001, "app_id": "app", "path": "vsync-off"}]
    rep, sim = simulate(_switch_cfg(sw))
    a, b = sim.manager.tickets
    assert a.t_completed <= b.t_completed
    assert b.from_path == "presto-jitt" and sim.manager.bindings["app"].current_path == "vsync-off"


def test_report_contains_switch_table():
    rep, _ = simulate(_switch_cfg([{"t_us": 1_000_000, "app_id": "app", "path": "presto-jitt"}]))
    row = rep["switches"][0]
    assert row["from"] == "legacy" and row["to"] == "presto-jitt" and row["delay"] is not None
    assert rep["switch_delay_us"]["count"] == 1


def test_integrity_audit_flags_mixed_tags():
    class R:
        def __init__(self, p, l):
            self.path_tag, self.latch_tag = p, l
    assert audit_path_integrity([R("a", "a"), R("a", "b"), R(None, None)]) == 1
