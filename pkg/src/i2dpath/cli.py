"""Command-line front end: run, compare, gen-trace."""

from __future__ import annotations

import argparse
import csv
import io
import os
import statistics
import sys

from .config import ConfigError, ScenarioConfig, load_config
from .domain import InvariantViolation
from .engine import random_stream
from .input import TraceError, gen_linear_trace, write_trace
from .metrics import PenTrack, direct_estimates
from .simulation import Simulation, path_specs

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3

COMPARE_FIELDS = ("design", "horizon_us", "app", "mean_latency_us", "reduction_us",
                  "direct_mean_us", "drop_rate", "underprediction_rate", "tearing_count",
                  "par_grant_rate", "events_completed")


def _variant(cfg: ScenarioConfig, design: str, horizon: int) -> ScenarioConfig:
    data = cfg.model_dump()
    data["bindings"] = [{"app_id": a["id"], "path": design} for a in data["apps"]]
    data["switches"] = []
    data["prediction"]["horizon_us"] = horizon
    return ScenarioConfig.model_validate(data)


def compare_rows(cfg: ScenarioConfig, designs: list, horizons: list) -> list:
    known = path_specs(cfg)
    for d in designs:
        if d not in known:
            raise ConfigError(f"designs: unknown design {d!r}")
    rows = []
    for h in horizons:
        base = None
        for d in designs:
            sim = Simulation(_variant(cfg, d, h))
            report = sim.run()
            for app_id in sorted(sim.pipelines):
                o = report["apps"][app_id]["overall"]
                est = direct_estimates(sim.pipelines[app_id].records.values(),
                                       PenTrack(sim.samples, cfg.input.dpi), h)
                mean = o["latency_us"]["mean"]
                if base is None:
                    base = {}
                base.setdefault(app_id, mean)
                grant = report["apps"][app_id]["designs"].get(d, {}).get("par_grant_rate")
                rows.append({
                    "design": d, "horizon_us": h, "app": app_id, "mean_latency_us": mean,
                    "reduction_us": None if mean is None or base[app_id] is None else round(base[app_id] - mean, 3),
                    "direct_mean_us": round(statistics.fmean(e[1] for e in est), 3) if est else None,
                    "drop_rate": o["drop_rate"], "underprediction_rate": o["underprediction_rate"],
                    "tearing_count": o["tearing_count"], "par_grant_rate": grant,
                    "events_completed": o["events_completed"],
                })
    return rows


def rows_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COMPARE_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r[k] is None else r[k]) for k in COMPARE_FIELDS})
    return buf.getvalue()


def rows_table(rows: list) -> str:
    def ms(v):
        return "-" if v is None else f"{v / 1000:.2f}"

    out = [f"{'design':<18}{'h(ms)':>6} {'app':<10}{'mean(ms)':>10}{'reduct(ms)':>11}"
           f"{'direct(ms)':>11}{'drop':>7}{'under':>7}{'torn':>6}"]
    for r in rows:
        out.append(f"{r['design']:<18}{r['horizon_us'] / 1000:>6.0f} {r['app']:<10}"
                   f"{ms(r['mean_latency_us']):>10}{ms(r['reduction_us']):>11}{ms(r['direct_mean_us']):>11}"
                   f"{(r['drop_rate'] or 0):>7.3f}{(r['underprediction_rate'] or 0):>7.3f}{r['tearing_count']:>6}")
    return "\n".join(out) + "\n"


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = args.out or cfg.run.out_dir
    sim = Simulation(cfg)
    report = sim.run()
    for path in sim.write(report, out):
        print(path)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    designs = [d.strip() for d in args.designs.split(",") if d.strip()]
    if not designs:
        raise ConfigError("designs: at least one design name is required")
    if args.horizons:
        horizons = [int(round(float(h) * 1000)) for h in args.horizons.split(",")]
    else:
        horizons = [cfg.prediction.horizon_us]
    rows = compare_rows(cfg, designs, horizons)
    out = args.out or cfg.run.out_dir
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "compare.csv"), "w", newline="") as fh:
        fh.write(rows_csv(rows))
    sys.stdout.write(rows_table(rows))
    return EXIT_OK


def cmd_gen_trace(args) -> int:
    samples = gen_linear_trace(args.duration, args.speed, args.speed_sigma, args.dpi, args.rate,
                               random_stream(args.seed, "trace"), width=args.width, height=args.height)
    write_trace(samples, args.out)
    print(f"{args.out}: {len(samples)} samples")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="i2dpath", description="Input-to-display path simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario and write reports")
    r.add_argument("-c", "--config", required=True)
    r.add_argument("-o", "--out", help="output directory (default: run.out_dir)")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="run the same scenario under several path designs")
    c.add_argument("-c", "--config", required=True)
    c.add_argument("-d", "--designs", required=True, help="comma-separated path names")
    c.add_argument("--horizons", help="comma-separated prediction horizons in ms (sweep)")
    c.add_argument("-o", "--out", help="directory for compare.csv (default: run.out_dir)")
    c.set_defaults(func=cmd_compare)

    g = sub.add_parser("gen-trace", help="write a synthetic up/down drawing trace")
    g.add_argument("--duration", type=float, default=150.0, help="seconds")
    g.add_argument("--speed", type=float, default=68.0, help="mean pen speed, mm/s")
    g.add_argument("--speed-sigma", type=float, default=12.0, help="per-stroke speed sigma, mm/s")
    g.add_argument("--dpi", type=float, default=493.0)
    g.add_argument("--rate", type=float, default=120.0, help="sample rate, Hz")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--width", type=int, default=1440)
    g.add_argument("--height", type=int, default=2560)
    g.add_argument("-o", "--out", required=True)
    g.set_defaults(func=cmd_gen_trace)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TraceError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
