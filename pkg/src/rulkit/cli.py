"""Command-line entry point.

Subcommands: data-inspect, train, cv, simulate, serve. Exit codes:
0 success, 2 usage/config error, 3 data error, 4 simulation fault.

The simulate subcommand replays a JSONL events file through
model -> controller -> device simulator on a deterministic virtual clock
(one second per line unless the line carries "dt"). Line kinds:

    {"kind": "features", "values": {name: value, ...}}
    {"kind": "manual", "state": "on" | "off"}
    {"kind": "release"}
    {"kind": "drop_heartbeats", "seconds": N}
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import artifacts, data, evaluation
from . import controller as ctl
from . import link as link_mod
from . import service as service_mod
from .errors import DataError, RulkitError, SplitError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_FAULT = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rulkit",
        description="Battery RUL classification and charging automation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_args(p):
        p.add_argument("--data", default=os.environ.get("RUL_DATA"),
                       help="battery-cycle CSV (default: $RUL_DATA)")
        p.add_argument("--synthetic", action="store_true",
                       help="use the synthetic generator instead of a CSV")
        p.add_argument("--seed", type=int, default=42)

    def add_feature_flags(p):
        group = p.add_mutually_exclusive_group()
        group.add_argument("--include-cycle-index", dest="include_cycle_index",
                           action="store_true", default=True)
        group.add_argument("--exclude-cycle-index", dest="include_cycle_index",
                           action="store_false",
                           help="drop the cycle index column (it leaks the target)")

    p = sub.add_parser("data-inspect", help="summarize a dataset")
    add_data_args(p)
    p.add_argument("--out", help="write a dataset.v1 snapshot JSON here")

    p = sub.add_parser("train", help="train one model on the 80:20 split")
    add_data_args(p)
    add_feature_flags(p)
    p.add_argument("--model", required=True, choices=evaluation.MODEL_KINDS)
    p.add_argument("--out", default="model.json", help="model.v1 output path")
    p.add_argument("--report", help="report.v1 output path")
    p.add_argument("--history-csv", help="per-epoch history CSV output path")
    p.add_argument("--profile", choices=("full", "smoke"), default="full")

    p = sub.add_parser("cv", help="k-fold cross-validation fold table")
    add_data_args(p)
    add_feature_flags(p)
    p.add_argument("--model", required=True, choices=evaluation.MODEL_KINDS)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--profile", choices=("full", "smoke"), default="full")
    p.add_argument("--out", help="write the fold table JSON here")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--stratified", dest="stratified", action="store_true",
                       default=True)
    group.add_argument("--plain-kfold", dest="stratified", action="store_false")

    p = sub.add_parser("simulate", help="replay an events file through the loop")
    p.add_argument("--model-file", required=True, help="model.v1 file")
    p.add_argument("--events", required=True, help="JSONL events file")
    p.add_argument("--trace", default="trace.log", help="trace log output path")

    p = sub.add_parser("serve", help="run the telemetry HTTP service")
    p.add_argument("--model-file", required=True, help="model.v1 file")
    p.add_argument("--addr", default=os.environ.get("RUL_HTTP_ADDR", "127.0.0.1:8080"))
    p.add_argument("--ui-dir", default=None,
                   help="static dashboard directory served under /ui")
    p.add_argument("--event-log", default="service_events.jsonl",
                   help="event log flushed here on shutdown")
    return parser


def _load_table(args) -> data.SampleTable:
    if args.synthetic:
        return data.synth_generate(seed=args.seed)
    if not args.data:
        print("error: no dataset; pass --data, set RUL_DATA, or use --synthetic",
              file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    if not os.path.exists(args.data):
        print(f"error: dataset file not found: {args.data}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    return data.load_dataset(args.data)


def _apply_feature_flags(table, args):
    if not getattr(args, "include_cycle_index", True):
        return table.without_features([data.CYCLE_INDEX])
    return table


def cmd_data_inspect(args) -> int:
    table = _load_table(args)
    labels, thresholds = data.bin_rul_terciles(table)
    table.labels = labels
    print(f"rows: {table.n_rows} (dropped {table.n_dropped})")
    print(f"features: {len(table.feature_names)}")
    print(f"{'feature':<26}{'min':>12}{'mean':>12}{'max':>12}")
    for j, name in enumerate(table.feature_names):
        col = table.x[:, j]
        print(f"{name:<26}{col.min():>12.3f}{col.mean():>12.3f}{col.max():>12.3f}")
    print("\nRUL histogram:")
    counts, edges = np.histogram(table.rul, bins=10)
    width = max(1, counts.max() // 40)
    for count, lo, hi in zip(counts, edges[:-1], edges[1:]):
        bar = "#" * int(count // width)
        print(f"  [{lo:7.1f}, {hi:7.1f})  {bar} {count}")
    print(f"\ntercile thresholds: t1={thresholds.t1:.1f} t2={thresholds.t2:.1f}")
    class_counts = np.bincount(labels, minlength=3)
    print("class counts: " + "  ".join(
        f"{c}={class_counts[c]}" for c in range(3)))
    if args.out:
        data.save_snapshot(args.out, table, thresholds)
        print(f"snapshot written to {args.out}")
    return EXIT_OK


def _feature_ranges(table) -> dict:
    return {
        name: {"min": float(table.x[:, j].min()), "max": float(table.x[:, j].max())}
        for j, name in enumerate(table.feature_names)
    }


def cmd_train(args) -> int:
    table = _apply_feature_flags(_load_table(args), args)
    artifact, report, history = artifacts.fit_artifact(
        args.model, table, seed=args.seed, profile=args.profile)
    artifact.metadata["feature_ranges"] = _feature_ranges(table)
    artifacts.save_model(args.out, artifact)
    print(f"model written to {args.out}")
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh)
        print(f"report written to {args.report}")
    if args.history_csv and hasattr(history, "train_loss"):
        evaluation.history_to_csv(history, args.history_csv)
        print(f"history written to {args.history_csv}")
    print()
    print(evaluation.compare_models([{
        "model": args.model,
        "train_accuracy": artifact.metadata["train_accuracy"],
        "test_accuracy": artifact.metadata["test_accuracy"],
    }]))
    return EXIT_OK


def cmd_cv(args) -> int:
    table = _apply_feature_flags(_load_table(args), args)
    labels, _ = data.bin_rul_terciles(table)
    table.labels = labels
    config = evaluation.default_config(args.model, profile=args.profile,
                                       seed=args.seed)
    try:
        report = evaluation.cv_run(args.model, config, table, k=args.folds,
                                   seed=args.seed, stratified=args.stratified)
    except SplitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(evaluation.format_cv_table(report))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"model": args.model, "folds": report.fold_accuracies,
                       "mean": report.mean, "std": report.std}, fh)
    return EXIT_OK


def _read_events(path: str) -> list[dict]:
    events = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                events.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: bad JSON ({exc})")
    return events


def run_simulation(artifact, events: list[dict],
                   config: ctl.ControllerConfig | None = None):
    """Deterministic closed-loop replay; returns (trace_lines, faulted)."""
    config = config or ctl.ControllerConfig()
    link = link_mod.LoopbackLink()
    state = ctl.initial_state(now=0.0)
    trace = []
    faulted = False
    now = 0.0
    drop_until = -1.0

    def run_commands(commands):
        for command in commands:
            if command in (ctl.Command.SET_RELAY_ON, ctl.Command.SET_RELAY_OFF):
                link.send(link_mod.MsgType.SET_RELAY,
                          link_mod.set_relay_payload(
                              command is ctl.Command.SET_RELAY_ON))

    for event in events:
        now += float(event.get("dt", 1.0))
        if now >= drop_until:
            for frame in link.poll(now):
                if frame.msg_type == link_mod.MsgType.HEARTBEAT:
                    state, _ = ctl.on_heartbeat(state, now)
                    trace.append(ctl.format_trace_line(now, "heartbeat", "-",
                                                       state, []))
        state, commands = ctl.on_clock(state, config, now)
        if commands:
            run_commands(commands)
            trace.append(ctl.format_trace_line(now, "clock", "-", state, commands))
        if state.mode is ctl.Mode.FAULT:
            faulted = True

        kind = event.get("kind")
        if kind == "features":
            row = artifact.row_from_features(event["values"])
            cls = int(artifact.predict(row)[0])
            state, commands = ctl.on_prediction(state, config, cls)
            run_commands(commands)
            trace.append(ctl.format_trace_line(now, "predict", cls, state, commands))
        elif kind == "manual":
            desired = ctl.Relay.ON if event["state"] == "on" else ctl.Relay.OFF
            state, commands = ctl.on_manual(state, desired)
            run_commands(commands)
            trace.append(ctl.format_trace_line(now, "manual", event["state"],
                                               state, commands))
        elif kind == "release":
            state = ctl.release_override(state)
            trace.append(ctl.format_trace_line(now, "release", "-", state, []))
        elif kind == "drop_heartbeats":
            drop_until = now + float(event["seconds"])
            trace.append(ctl.format_trace_line(now, "drop_heartbeats",
                                               event["seconds"], state, []))
        else:
            raise DataError(f"unknown event kind {kind!r}")
    return trace, faulted


def cmd_simulate(args) -> int:
    if not os.path.exists(args.model_file):
        print(f"error: model file not found: {args.model_file}", file=sys.stderr)
        return EXIT_USAGE
    artifact = artifacts.load_model(args.model_file)
    events = _read_events(args.events)
    trace, faulted = run_simulation(artifact, events)
    with open(args.trace, "w") as fh:
        for line in trace:
            fh.write(line + "\n")
    print(f"{len(trace)} trace lines written to {args.trace}")
    if faulted:
        print("simulation entered FAULT", file=sys.stderr)
        return EXIT_FAULT
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    if not os.path.exists(args.model_file):
        print(f"error: model file not found: {args.model_file}", file=sys.stderr)
        return EXIT_USAGE
    artifact = artifacts.load_model(args.model_file)
    core = service_mod.ServiceCore(artifact=artifact, link=link_mod.open_link())
    ui_dir = args.ui_dir
    if ui_dir is None:
        bundled = os.path.join(os.path.dirname(os.path.dirname(
            os.path.dirname(os.path.abspath(__file__)))), "frontend", "dist")
        ui_dir = bundled if os.path.isdir(bundled) else None
    app = service_mod.create_app(core, ui_dir=ui_dir)
    stop = service_mod.start_heartbeat_pump(core)
    host, _, port = args.addr.rpartition(":")
    try:
        port_no = int(port)
    except ValueError:
        print(f"error: bad --addr {args.addr!r}, expected host:port", file=sys.stderr)
        return EXIT_USAGE
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=port_no)
    except KeyboardInterrupt:
        pass
    finally:
        stop.set()
        count = core.dump_events(args.event_log)
        print(f"{count} events flushed to {args.event_log}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "data-inspect": cmd_data_inspect,
        "train": cmd_train,
        "cv": cmd_cv,
        "simulate": cmd_simulate,
        "serve": cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RulkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
