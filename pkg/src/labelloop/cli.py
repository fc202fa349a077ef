"""Command-line entry points.

    labelloop serve        run the HTTP API (SIGTERM drains and exits 0)
    labelloop ingest       replay an NDJSON file into a project
    labelloop simulate     active-learning label-efficiency comparison
    labelloop trends       export or recompute trend series
    labelloop model        manual retrain trigger
    labelloop replay-check verify the event log rebuilds cleanly
"""
from __future__ import annotations

import argparse
import json
import signal
import sys
import threading

from .clock import SimulatedClock, parse_timestamp
from .engine import Platform, replay_check
from .ingest import StreamSourceConfig, open_stream
from .simulate import SimulationConfig, run_efficiency_comparison
from .trends import trends_to_csv


def _add_data_dir(parser):
    parser.add_argument("--data-dir", default="data",
                        help="platform state directory (default: ./data)")


def _platform(args, fsync: bool = True) -> Platform:
    clock = SimulatedClock() if getattr(args, "clock", "real") == "simulated" else None
    platform = Platform(args.data_dir, clock=clock, fsync=fsync)
    for path in getattr(args, "project_config", None) or []:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
        if config["project_id"] not in platform.projects:
            platform.create_project(config)
    return platform


def cmd_serve(args) -> int:
    from .service import Service
    platform = _platform(args)
    service = Service(platform, listen=args.listen, port=args.port,
                      static_dir=args.static_dir).start()
    print(f"listening on http://{args.listen}:{service.port}", flush=True)
    stop = threading.Event()

    def handle(signum, frame):
        stop.set()

    signal.signal(signal.SIGTERM, handle)
    signal.signal(signal.SIGINT, handle)
    stop.wait()
    print("draining and shutting down", flush=True)
    service.stop()
    return 0


def cmd_ingest(args) -> int:
    platform = _platform(args)
    if args.project not in platform.projects:
        print(f"error: unknown project {args.project!r}", file=sys.stderr)
        return 2
    stream = open_stream(StreamSourceConfig("file_replay", args.source,
                                            speedup=args.speedup))
    stats = platform.ingest_stream(args.project, stream)
    platform.close()
    print(json.dumps(stats.as_dict()))
    return 0


def cmd_simulate(args) -> int:
    config = SimulationConfig()
    seeds = range(args.seeds)
    if args.strategy == "both":
        result = run_efficiency_comparison(seeds, config)
        csv_text = result.to_csv()
        summary = (f"uncertainty median {result.uncertainty_median:.0f}, "
                   f"random median {result.random_median:.0f}, "
                   f"ratio {result.ratio:.3f}")
    else:
        from .simulate import run_active_learning
        rows = ["seed,strategy,labels_to_target"]
        values = []
        for seed in seeds:
            labels = run_active_learning(args.strategy, seed, config)
            values.append(labels)
            rows.append(f"{seed},{args.strategy},{labels}")
        csv_text = "\n".join(rows) + "\n"
        values.sort()
        summary = f"{args.strategy} median {values[len(values) // 2]}"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    print(summary, file=sys.stderr)
    return 0


def cmd_trends(args) -> int:
    platform = _platform(args, fsync=(args.action == "recompute"))
    if args.project not in platform.projects:
        print(f"error: unknown project {args.project!r}", file=sys.stderr)
        return 2
    if args.action == "recompute":
        n = platform.recompute_predictions(args.project)
        platform.close()
        print(f"re-predicted {n} documents")
        return 0
    points = platform.trend_points(args.project,
                                   parse_timestamp(args.range_from),
                                   parse_timestamp(args.range_to))
    csv_text = trends_to_csv(points)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    return 0


def cmd_model(args) -> int:
    platform = _platform(args)
    if args.project not in platform.projects:
        print(f"error: unknown project {args.project!r}", file=sys.stderr)
        return 2
    model = platform.retrain(args.project)
    platform.close()
    if model is None:
        print("not retrained: need consensus labels in at least 2 classes",
              file=sys.stderr)
        return 1
    print(f"published model version {model.version} "
          f"(trained on {model.trained_on} examples)")
    return 0


def cmd_replay_check(args) -> int:
    events, ok, message = replay_check(args.data_dir)
    print(message)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelloop",
        description="stream filtering, crowd labelling and trend indices")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP API")
    _add_data_dir(p)
    p.add_argument("--listen", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--clock", choices=["real", "simulated"], default="real")
    p.add_argument("--static-dir", default=None,
                   help="serve frontend assets from this directory")
    p.add_argument("--project-config", action="append",
                   help="project config JSON to register at startup")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("ingest", help="replay an NDJSON file into a project")
    _add_data_dir(p)
    p.add_argument("--source", required=True, help="NDJSON file path")
    p.add_argument("--speedup", type=float, default=0.0,
                   help="replay pacing; 0 = as fast as possible")
    p.add_argument("--project", required=True, help="target project id")
    p.add_argument("--clock", choices=["real", "simulated"], default="simulated")
    p.add_argument("--project-config", action="append",
                   help="project config JSON to register before ingesting")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("simulate", help="label-efficiency simulation")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--strategy", choices=["uncertainty", "random", "both"],
                   default="both")
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("trends", help="trend series maintenance and export")
    trends_sub = p.add_subparsers(dest="action", required=True)
    pe = trends_sub.add_parser("export", help="write the trend CSV")
    _add_data_dir(pe)
    pe.add_argument("--project", required=True)
    pe.add_argument("--from", dest="range_from", required=True)
    pe.add_argument("--to", dest="range_to", required=True)
    pe.add_argument("--out", default=None)
    pe.set_defaults(func=cmd_trends, action="export")
    pr = trends_sub.add_parser("recompute",
                               help="re-predict stored documents with the live model")
    _add_data_dir(pr)
    pr.add_argument("--project", required=True)
    pr.set_defaults(func=cmd_trends, action="recompute")

    p = sub.add_parser("model", help="model operations")
    model_sub = p.add_subparsers(dest="action", required=True)
    pm = model_sub.add_parser("retrain", help="train and publish now")
    _add_data_dir(pm)
    pm.add_argument("--project", required=True)
    pm.set_defaults(func=cmd_model)

    p = sub.add_parser("replay-check", help="verify log rebuild")
    _add_data_dir(p)
    p.set_defaults(func=cmd_replay_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
