"""Scenario assembly: trace, apps, path manager, display pulses, report."""

from __future__ import annotations

import os
from collections import defaultdict
from typing import Optional

from .config import ConfigError, PathSection, ScenarioConfig, parse_config
from .designs import DESIGN_NAMES, Jitt, JittJep, JittPar, Legacy, VsyncOff
from .display import ScanoutState
from .domain import AppModel, DisplayConfig, InvariantViolation, TAppDist
from .engine import Engine, period_us, random_stream, us_from_seconds
from .input import InputHardwareModel, apply_input_hardware, gen_linear_trace, load_trace
from .metrics import config_digest, dumps_report, latency_stats, records_csv, summarize
from .path_manager import PathError, PathManager, PathRegistry, audit_path_integrity
from .pipeline import AppPipeline
from .policy import JittConfig, ParConfig, Predictor


def make_design(spec: PathSection, app_id: str, master_seed: int):
    kind = spec.kind
    if kind == "legacy":
        return Legacy(spec.name, offset=spec.offset_us)
    if kind == "vsync-off":
        return VsyncOff(spec.name)
    p = spec.predictor
    predictor = Predictor(p.mode, p.k, p.prior_us, p.window, p.seed_values, p.bias_us)
    jitt = JittConfig(spec.t_out_pred_us)
    if kind == "presto-jitt":
        return Jitt(spec.name, jitt, predictor)
    if kind == "presto-jitt-jep":
        return JittJep(spec.name, jitt, predictor)
    par = ParConfig(spec.par.rect_w, spec.par.rect_h, spec.par.guard_us, spec.par.detection,
                    spec.par.sample_fraction, spec.par.false_negative_prob)
    rng = random_stream(master_seed, f"{app_id}/par-detect/{spec.name}")
    return JittPar(spec.name, jitt, predictor, par, rng_detect=rng)


def path_specs(cfg: ScenarioConfig) -> dict:
    specs = {name: PathSection(name=name) for name in DESIGN_NAMES}
    for p in cfg.paths:
        specs[p.name] = p
    return specs


def build_registry(cfg: ScenarioConfig) -> PathRegistry:
    specs = path_specs(cfg)
    reg = PathRegistry(default=cfg.default_path)
    seed = cfg.run.master_seed
    for name, spec in specs.items():
        reg.register_path(name, lambda app_id, spec=spec: make_design(spec, app_id, seed))
    return reg


def app_model(section) -> AppModel:
    t = section.t_app
    dist = TAppDist(t.kind, t.mean_us, t.sigma_us, tuple(t.values), tuple(tuple(o) for o in t.overrides))
    return AppModel(section.id, dist, section.dirty_model, section.brush_radius,
                    section.outside_change_prob)


class Simulation:
    def __init__(self, cfg: ScenarioConfig, keep_log: bool = False, samples=None):
        self.cfg = cfg
        d = cfg.display
        self.display_cfg = DisplayConfig(d.width, d.height, d.t_sync_us, d.scan_rate)
        self.engine = Engine(keep_log=keep_log)
        self.scanout = ScanoutState(self.display_cfg)
        seed = cfg.run.master_seed
        inp = cfg.input
        self.duration_us = us_from_seconds(cfg.run.duration_s)
        self.end = self.duration_us + cfg.run.drain_us
        if samples is None:
            if inp.trace_file:
                samples = load_trace(inp.trace_file, d.width, d.height)
            else:
                samples = gen_linear_trace(cfg.run.duration_s, inp.speed_mm_s, inp.speed_sigma_mm_s,
                                           inp.dpi, inp.sample_rate_hz, random_stream(seed, "trace"),
                                           width=d.width, height=d.height)
        self.samples = [s for s in samples if s.t_physical < self.duration_us]
        hw = InputHardwareModel(inp.sample_rate_hz, inp.hw_latency_mean_us, inp.hw_latency_sigma_us)
        try:
            self.registry = build_registry(cfg)
            self.manager = PathManager(self.registry)
            bound = {b.app_id: b.path for b in cfg.bindings}
            self.pipelines: dict = {}
            for a in cfg.apps:
                model = app_model(a)
                pref = bound.get(a.id, a.path)
                binding = self.manager.bind_at_launch(a.id, pref if pref is not None else cfg.default_path)
                events = apply_input_hardware(self.samples, hw, random_stream(seed, f"{a.id}/hw"), a.id)
                design = self.registry.create(binding.current_path, a.id)
                pipe = AppPipeline(self, model, events, design, pool_size=d.buffer_count,
                                   t_out=d.t_out_us, horizon=cfg.prediction.horizon_us,
                                   sample_period=period_us(inp.sample_rate_hz),
                                   rng_tapp=random_stream(seed, f"{a.id}/t_app"),
                                   rng_outside=random_stream(seed, f"{a.id}/outside"))
                self.manager.attach_pipeline(a.id, pipe)
                self.pipelines[a.id] = pipe
        except PathError as e:
            raise ConfigError(str(e)) from None
        for sw in cfg.switches:
            if sw.path not in self.registry and self.registry.default not in self.registry:
                raise ConfigError(f"switches: path {sw.path!r} is not registered and there is no default")

    # -- running ---

    def _pulse(self, _payload) -> None:
        now = self.engine.now
        self.scanout.advance(now)
        for app_id in sorted(self.pipelines):
            self.pipelines[app_id].on_pulse(now)
        nxt = now + self.display_cfg.t_sync
        if nxt <= self.end:
            self.engine.schedule(nxt, "sync_pulse", self._pulse)

    def run(self) -> dict:
        self.engine.schedule(0, "sync_pulse", self._pulse)
        for app_id in sorted(self.pipelines):
            self.pipelines[app_id].start()
        for sw in self.cfg.switches:
            self.engine.schedule(sw.t_us, f"{sw.app_id}:apply_path",
                                 lambda _, sw=sw: self.manager.apply_path(sw.app_id, sw.path, self.engine.now))
        self.engine.run_until(self.end)
        self.verify()
        return self.report()

    def verify(self) -> None:
        t = self.display_cfg.t_sync
        for app_id, pipe in self.pipelines.items():
            pipe.pool.check()
            for r in pipe.records.values():
                r.check()
            cycles = sorted(c for dsg in pipe.designs_used for c in dsg.ledger.drop_cycles)
            for a, b in zip(cycles, cycles[1:]):
                if b - a == t:
                    raise InvariantViolation(f"{app_id}: frames dropped in consecutive cycles {a} and {b}")

    # -- reporting ---

    def app_digest(self, app_id: str) -> str:
        c = self.cfg
        doc = {
            "display": c.display.model_dump(), "input": c.input.model_dump(),
            "prediction": c.prediction.model_dump(),
            "run": {"duration_s": c.run.duration_s, "master_seed": c.run.master_seed,
                    "drain_us": c.run.drain_us},
            "app": next(a for a in c.apps if a.id == app_id).model_dump(),
            "paths": [p.model_dump() for p in c.paths], "default_path": c.default_path,
            "bindings": [b.model_dump() for b in c.bindings if b.app_id == app_id],
            "switches": [s.model_dump() for s in c.switches if s.app_id == app_id],
        }
        return config_digest(doc)

    def app_report(self, app_id: str) -> dict:
        pipe = self.pipelines[app_id]
        records = [pipe.records[k] for k in sorted(pipe.records)]
        by_path = defaultdict(list)
        for r in records:
            by_path[r.path_tag or "undelivered"].append(r)
        frames_by = defaultdict(list)
        for f in pipe.frames:
            frames_by[f.tag].append(f)
        extra = defaultdict(dict)
        for dsg in pipe.designs_used:
            for k, v in dsg.stats().items():
                if isinstance(v, (int, float)) and k != "par_grant_rate":
                    extra[dsg.name][k] = extra[dsg.name].get(k, 0) + v
        for name, ex in extra.items():
            if "par_requests" in ex:
                ex["par_grant_rate"] = round(ex["par_grants"] / ex["par_requests"], 3) if ex["par_requests"] else None
        designs = {name: summarize(recs, frames_by.get(name, []), self.duration_us, self.display_cfg,
                                   dict(extra.get(name, {})))
                   for name, recs in sorted(by_path.items())}
        tickets = [t for t in self.manager.tickets if t.app_id == app_id]
        return {
            "app_id": app_id,
            "config_digest": self.app_digest(app_id),
            "master_seed": self.cfg.run.master_seed,
            "final_path": self.manager.bindings[app_id].current_path,
            "overall": summarize(records, pipe.frames, self.duration_us, self.display_cfg),
            "designs": designs,
            "path_integrity_violations": audit_path_integrity(records),
            "switches": [{"from": t.from_path, "to": t.to_path, "t_requested": t.t_requested,
                          "t_completed": t.t_completed, "delay": t.delay} for t in tickets],
        }

    def report(self) -> dict:
        delays = [t.delay for t in self.manager.tickets if t.delay is not None]
        return {
            "config_digest": config_digest(self.cfg.model_dump()),
            "master_seed": self.cfg.run.master_seed,
            "duration_us": self.duration_us,
            "apps": {a: self.app_report(a) for a in sorted(self.pipelines)},
            "switch_delay_us": dict(latency_stats(delays), count=len(delays),
                                    incomplete=len(self.manager.tickets) - len(delays)),
            "switches": self.manager.switch_table(),
        }

    def write(self, report: dict, out_dir: str) -> list:
        os.makedirs(out_dir, exist_ok=True)
        written = []

        def put(name, text):
            path = os.path.join(out_dir, name)
            with open(path, "w", newline="") as fh:
                fh.write(text)
            written.append(path)

        put("report.json", dumps_report(report))
        for app_id, pipe in sorted(self.pipelines.items()):
            put(f"report_{app_id}.json", dumps_report(report["apps"][app_id]))
            put(f"events_{app_id}.csv", records_csv(pipe.records.values()))
        return written


def run_scenario(cfg, out_dir: Optional[str] = None, samples=None):
    """Run one scenario (config model or plain dict); returns ``(report, simulation)``."""
    if not isinstance(cfg, ScenarioConfig):
        cfg = parse_config(cfg)
    sim = Simulation(cfg, samples=samples)
    report = sim.run()
    if out_dir is not None:
        sim.write(report, out_dir)
    return report, sim
