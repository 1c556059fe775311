"""Command-line entry point: ``deeprscn <subcommand> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import harness
from .datasets import generate_mackey_glass, MgConfig, write_csv

log = logging.getLogger("deeprscn")


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # shared by the top-level parser and every subcommand; subcommands use
    # SUPPRESS so a flag given before the subcommand is not reset
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d(None), help="JSON experiment config")
    p.add_argument("--seed", type=int, default=d(None), help="base seed (overrides the config)")
    p.add_argument("--out", default=d("out"), help="output directory (default: out)")
    p.add_argument("--threads", type=int, default=d(os.cpu_count() or 1), help="concurrent trials")
    p.add_argument("--trials", type=int, default=d(None), help="trial count (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deeprscn",
        description="Deep recurrent stochastic configuration networks and reservoir baselines.",
        parents=[_global_flags(False)],
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    flags = _global_flags(True)

    g = sub.add_parser("generate", parents=[flags], help="write benchmark datasets as CSV")
    g.add_argument("--task", choices=harness.TASKS[:-1], default=None)

    sub.add_parser("train", parents=[flags], help="fit one model and write its construction log")
    sub.add_parser("evaluate", parents=[flags], help="fit one model, score it and write prediction curves")
    sub.add_parser("trials", parents=[flags], help="run seeded trials and write a report")

    gr = sub.add_parser("grid", parents=[flags], help="grid search on validation NRMSE")
    gr.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="KEY=V1,V2",
        help="grid axis; KEY is a config path such as rsc.g_max, values are JSON (repeatable)",
    )
    gr.add_argument("--grid-trials", type=int, default=5)

    rp = sub.add_parser("reproduce", parents=[flags], help="run a full benchmark comparison table")
    rp.add_argument("table", choices=("mg", "sysid"))

    od = sub.add_parser("online-demo", parents=[flags], help="projection updates on a drifting plant")
    od.add_argument("--gain", type=float, default=1.0, help="projection gain a in (0, 1]")
    od.add_argument("--reg", type=float, default=1e-4, help="projection regulariser c > 0")
    return parser


def load_config(args) -> harness.ExperimentConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{args.config}: invalid JSON ({exc})") from None
    if args.seed is not None:
        data["base_seed"] = args.seed
    if args.trials is not None:
        data["trial_count"] = args.trials
    return harness.ExperimentConfig.from_dict(data)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dataset_columns(ds) -> dict:
    cols = {f"input{k}": ds.inputs[k] for k in range(ds.input_dim)}
    cols.update({f"target{q}": ds.targets[q] for q in range(ds.output_dim)})
    return cols


def cmd_generate(args) -> int:
    cfg = load_config(args)
    if args.task:
        cfg = dataclasses.replace(cfg, task=args.task)
    out = _out_dir(args)
    splits = harness.load_task(cfg)
    for ds in splits:
        write_csv(out / f"{cfg.task}_{ds.role}.csv", _dataset_columns(ds))
    if cfg.task.startswith("mg"):
        seed = cfg.base_seed if cfg.data_seed is None else cfg.data_seed
        series = generate_mackey_glass(MgConfig(**{"seed": seed, **cfg.mg}))
        write_csv(out / "mackey_glass_series.csv", {"t": np.arange(series.size, dtype=float), "y": series})
    print(f"wrote {cfg.task} datasets to {out}")
    return 0


def _fit_once(cfg):
    splits = harness.load_task(cfg)
    fitted = harness.fit_model(cfg, splits, harness.trial_rng(cfg.base_seed, 0))
    return splits, fitted


def _scores(fitted, splits) -> dict:
    return {ds.role: harness.score(fitted, ds) for ds in splits}


def cmd_train(args) -> int:
    cfg = load_config(args)
    out = _out_dir(args)
    splits, fitted = _fit_once(cfg)
    summary = {"family": cfg.family, "task": cfg.task, "sizes": list(fitted.sizes), "nrmse": _scores(fitted, splits)}
    if fitted.construction is not None:
        fitted.construction.write_log(out / "construction_log.jsonl")
        summary["stop_reason"] = fitted.construction.stop_reason
        summary["certificate_violations"] = fitted.construction.certificate_violations
    harness.dump_json(summary, out / "train.json")
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_config(args)
    out = _out_dir(args)
    splits, fitted = _fit_once(cfg)
    scores = _scores(fitted, splits)
    harness.emit_plot_data(harness.prediction_rows(fitted, splits.test), out / "test_predictions.csv")
    corr = harness.node_output_correlation(fitted, splits.test)
    harness.dump_json(
        {
            "family": cfg.family,
            "sizes": list(fitted.sizes),
            "nrmse": scores,
            "layer_mean_abs_correlation": corr.layer_mean_abs,
            "constant_nodes": corr.constant_nodes,
        },
        out / "evaluate.json",
    )
    for role, v in scores.items():
        print(f"{role:<10} NRMSE {v:.5f}")
    for i, c in enumerate(corr.layer_mean_abs, 1):
        print(f"layer {i}: mean |corr| with target {c:.4f}")
    return 0


def _write_report(out: Path, title: str, config: dict, rows, results) -> None:
    harness.dump_json(harness.report_payload(title, config, rows, results), out / "report.json")
    (out / "report.txt").write_text(harness.format_table(rows, title))
    harness.dump_json(harness.timing_payload(rows, results), out / "timings.json")
    (out / "report_with_timings.txt").write_text(harness.format_table(rows, title, timings=True))


def cmd_trials(args) -> int:
    cfg = load_config(args)
    out = _out_dir(args)
    results, row = harness.run_trials(cfg, threads=args.threads)
    config = cfg.to_dict()
    config.pop("out", None)
    _write_report(out, f"{cfg.family} on {cfg.task}", config, [row], {cfg.family: results})
    harness.emit_plot_data([r.to_dict() for r in results], out / "trials.csv")
    print(harness.format_table([row], timings=True), end="")
    return 0


def _parse_param(text: str):
    key, sep, values = text.partition("=")
    if not sep or not key or not values:
        raise ValueError(f"--param expects KEY=V1,V2,..., got {text!r}")
    try:
        parsed = json.loads(f"[{values}]")
    except json.JSONDecodeError:
        parsed = values.split(",")
    return key, parsed


def cmd_grid(args) -> int:
    cfg = load_config(args)
    if not args.param:
        raise ValueError("grid needs at least one --param")
    space = dict(_parse_param(p) for p in args.param)
    out = _out_dir(args)
    res = harness.grid_search(cfg, space, trials=args.grid_trials, threads=args.threads)
    rows = res.curve_rows()
    harness.emit_plot_data(
        [{k: json.dumps(v) if isinstance(v, list) else v for k, v in r.items()} for r in rows],
        out / "validation_curve.csv",
    )
    harness.dump_json({"best": res.best_params, "curve": rows}, out / "grid.json")
    for r in rows:
        print(json.dumps(r, sort_keys=True))
    print(f"best: {json.dumps(res.best_params, sort_keys=True)}")
    return 0


def cmd_reproduce(args) -> int:
    overrides = {}
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
        for key in ("task", "family", "trial_count", "base_seed"):
            overrides.pop(key, None)
    trials = args.trials or 30
    seed = 0 if args.seed is None else args.seed
    out = _out_dir(args)
    run = harness.reproduce_table(args.table, trials=trials, seed=seed, threads=args.threads, overrides=overrides)
    _write_report(out, run.title, run.config, run.rows, run.results)
    harness.emit_plot_data(
        [
            {"model": r.model, "size": r.size, "train_time_mean": r.train_time[0], "test_nrmse_mean": r.test_nrmse[0]}
            for r in run.rows
        ],
        out / "time_vs_size.csv",
    )
    print(harness.format_table(run.rows, run.title, timings=True), end="")
    return 0


def cmd_online_demo(args) -> int:
    from .readout import ProjectionConfig

    seed = 0 if args.seed is None else args.seed
    out = _out_dir(args)
    res = harness.online_demo(seed=seed, projection=ProjectionConfig(args.gain, args.reg))
    t = res.targets[0]
    rows = [
        {"step": n, "target": t[n], "static": res.static_predictions[0, n], "online": res.online_predictions[0, n]}
        for n in range(t.size)
    ]
    harness.emit_plot_data(rows, out / "online_curve.csv")
    harness.dump_json({"static_nrmse": res.static_nrmse, "online_nrmse": res.online_nrmse}, out / "online.json")
    print(f"fixed readout NRMSE    {res.static_nrmse:.5f}")
    print(f"projection update NRMSE {res.online_nrmse:.5f}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "trials": cmd_trials,
    "grid": cmd_grid,
    "reproduce": cmd_reproduce,
    "online-demo": cmd_online_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("deeprscn: error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"deeprscn: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
