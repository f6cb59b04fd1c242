"""Command-line front end.

    rftrack run CONFIG [--seed S] [--out FILE] [--format csv|json]
    rftrack sweep CONFIG --param q|sigma_th --values V [V ...] [--runs N]
    rftrack repro fig4|dcrit|mse|detection [--out DIR]

Exit codes: 0 success, 1 runtime failure, 2 configuration error, 3 an
acceptance threshold was missed.
"""
import argparse
import csv
import io
import json
import secrets
import sys
from pathlib import Path

import numpy as np

from . import repro
from .channel import dbm_to_mw
from .config import config_hash, config_to_dict, load_config
from .errors import ConfigurationError
from .sim import ScenarioConfig, run_batch, run_scenario

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_THRESHOLD = 0, 1, 2, 3
SWEEP_PARAMS = ("q", "sigma_th")


def fmt(x) -> str:
    """Float with 17 significant digits (round-trips exactly)."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(np.float64(x))) if np.isfinite(x) else str(float(x))


def record_header(n_trackers: int) -> list:
    head = ["run_id", "step", "true_x", "true_y", "true_vx", "true_vy", "est_x", "est_y", "est_vx", "est_vy"]
    head += ["sq_err_pos", "sq_err_state", "dcrit_db", "detect_outcome", "truth_s"]
    for i in range(n_trackers):
        head += [f"uav{i}_x", f"uav{i}_y"]
    return head + ["seed", "config_hash"]


def records(result, run_id: int, chash: str) -> list:
    """One flat row per step of a :class:`RunResult`."""
    rows = []
    for m in result.steps:
        row = [run_id, m.step, *m.true_state, *m.estimate, m.sq_err_pos, m.sq_err_state, m.dcrit_db]
        row += [m.detect_outcome, m.truth_s, *np.ravel(m.tracker_positions), result.seed, chash]
        rows.append(row)
    return rows


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, str):
        return v
    v = float(v)
    return v if np.isfinite(v) else str(v)


def write_rows(path, header, rows, fmt_kind="csv", config=None):
    if fmt_kind == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows([[fmt(v) for v in row] for row in rows])
        text = buf.getvalue()
    else:
        doc = {"config": config, "rows": [dict(zip(header, map(_json_value, row))) for row in rows]}
        text = json.dumps(doc, indent=1) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _resolve_seed(seed):
    if seed is None:
        seed = secrets.randbits(32)
        print(f"seed: {seed}", file=sys.stderr)
    return seed


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    seed = _resolve_seed(args.seed if args.seed is not None else _file_seed(args.config))
    cfg = cfg.replace(master_seed=seed)
    result = run_scenario(cfg)
    header = record_header(cfg.n_trackers)
    write_rows(args.out, header, records(result, 0, config_hash(cfg)), args.format, config_to_dict(cfg))
    return EXIT_OK


def _file_seed(path):
    # a seed written in the config file counts as given
    try:
        from .config import tomllib

        with open(path, "rb") as f:
            return tomllib.load(f).get("scenario", {}).get("master_seed")
    except (OSError, ValueError):
        return None


def sweep_rows(cfg: ScenarioConfig, param: str, values, runs: int):
    """One row per (value, metric): detection rates and final-step errors."""
    import dataclasses

    rows = []
    for v in values:
        if param == "q":
            ch = dataclasses.replace(cfg.channel, q=float(v))
        else:
            ch = dataclasses.replace(cfg.channel, sigma_th=float(dbm_to_mw(v)))
        stats = run_batch(cfg.replace(channel=ch), runs)
        conf = stats.confusion
        metrics = {
            "tp_rate": conf["tp_rate"],
            "fp_rate": conf["fp_rate"],
            "fn_rate": conf["fn_rate"],
            "tn_rate": conf["tn_rate"],
            "final_sq_err_state": stats.mean_sq_err_state[-1] if cfg.n_steps else float("nan"),
            "final_dcrit_db": stats.mean_dcrit_db[-1] if cfg.n_steps else float("nan"),
        }
        rows += [[param, float(v), name, val] for name, val in metrics.items()]
    return rows


def cmd_sweep(args) -> int:
    if args.param not in SWEEP_PARAMS:
        raise ConfigurationError(f"unknown sweep parameter {args.param!r}; choose from {SWEEP_PARAMS}")
    cfg = load_config(args.config)
    cfg = cfg.replace(master_seed=_resolve_seed(args.seed if args.seed is not None else _file_seed(args.config)))
    rows = sweep_rows(cfg, args.param, args.values, args.runs)
    write_rows(args.out, ["param", "value", "metric", "mean"], rows, args.format, config_to_dict(cfg))
    return EXIT_OK


def cmd_repro(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = repro.RECIPES[args.scenario](out, quick=args.quick)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_THRESHOLD


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rftrack", description="Swarm tracking of an intermittent RF emitter.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario and write per-step records")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default="-")
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="aggregate detection and error statistics over a parameter")
    s.add_argument("config")
    s.add_argument("--param", required=True)
    s.add_argument("--values", type=float, nargs="+", required=True, help="q values, or sigma_th in dBm")
    s.add_argument("--runs", type=int, default=10)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", default="-")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=cmd_sweep)

    rp = sub.add_parser("repro", help="run a canned acceptance scenario")
    rp.add_argument("scenario", choices=sorted(repro.RECIPES))
    rp.add_argument("--out", default="repro_out")
    rp.add_argument("--quick", action="store_true", help="fewer seeds; thresholds still reported")
    rp.set_defaults(func=cmd_repro)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - map to the runtime exit code
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
