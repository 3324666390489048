"""Command line entry point: ``innkf simulate|estimate|train|evaluate|bench``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.  The log level is taken from ``INNKF_LOG_LEVEL`` (default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import simio
from .bench import DEFAULT_SIZES, bench_addmul, format_table
from .errors import DataError, InnkfError, LengthMismatch
from .metrics import eval_ate, eval_re
from .pipeline import (
    RE_DISTANCE_WINDOW,
    RE_TIME_WINDOW,
    build_report,
    run_estimate,
    simulate,
    train_config_from_config,
    training_set,
    write_error_csv,
    write_report,
)
from .seggn.serialize import load_model, save_model
from .seggn.train import train

log = logging.getLogger("innkf")


def _config(path):
    return simio.load_config(path) if path else {}


def cmd_simulate(args) -> int:
    cfg = _config(args.config)
    t0 = time.perf_counter()
    seq = simulate(cfg, args.seed, args.duration, args.out, args.terrain)
    log.info("wrote %d records to %s in %.2f s", len(seq.sensors), args.out, time.perf_counter() - t0)
    print(f"simulated {len(seq.sensors)} records ({args.duration:g} s) -> {args.out}")
    return 0


def cmd_estimate(args) -> int:
    cfg = _config(args.config)
    sensors, truth, header = simio.read_dataset(args.dataset)
    model = load_model(args.model)[0] if args.model else None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    est = run_estimate(sensors, truth, cfg, model)
    elapsed = time.perf_counter() - t0
    simio.write_trajectory(out / "raw.csv", est.t, est.raw.X)
    estimates = {"raw": est.raw.X}
    if est.compensated is not None:
        simio.write_trajectory(out / "compensated.csv", est.t, est.compensated)
        estimates["compensated"] = est.compensated
    runtime = {"estimate_s": elapsed, "ticks": len(est.t), "ms_per_tick": 1e3 * elapsed / len(est.t)}
    (out / "runtime.json").write_text(json.dumps(runtime, indent=2) + "\n", encoding="utf-8")
    if truth is None:
        print(f"no ground truth in {args.dataset}; trajectories written to {out}")
        return 0
    _, truth_X = simio.truth_arrays(truth)
    report = build_report(Path(args.dataset).name, header, est.t, estimates, truth_X)
    write_report(out / "report.json", report)
    for name, x in estimates.items():
        write_error_csv(out / f"errors_{name}.csv", est.t, x, truth_X)
    _print_report(report)
    return 0


def _print_report(report):
    print(f"{'estimator':<12} {'ATE_R[rad]':>11} {'ATE_v[m/s]':>11} {'ATE_p[m]':>9} "
          f"{'RE_p[%]':>8} {'RE_R[rad/m]':>12}")
    for name, m in report["estimators"].items():
        re = m.get("RE_time", {})
        rp = re.get("RE_p_percent_mean")
        rr = re.get("RE_R_rad_per_m_mean")
        fmt = lambda x, w, p: f"{x:>{w}.{p}f}" if x is not None else f"{'n/a':>{w}}"  # noqa: E731
        print(f"{name:<12} {m['ATE_R_rad']:>11.5f} {m['ATE_v_mps']:>11.5f} {m['ATE_p_m']:>9.4f} "
              f"{fmt(rp, 8, 3)} {fmt(rr, 12, 5)}")


def cmd_train(args) -> int:
    cfg = _config(args.config)
    tcfg = train_config_from_config(cfg, preset=args.preset, epochs=args.epochs, stride=args.stride)
    t0 = time.perf_counter()
    data = training_set(args.dataset, cfg, jobs=args.jobs)
    log.info("prepared %d samples in %.2f s", len(data), time.perf_counter() - t0)
    model, hist = train(data, tcfg, seed=args.seed, log=log.info)
    meta = {"seed": args.seed, "preset": tcfg.preset, "datasets": [Path(p).name for p in args.dataset],
            "epochs": tcfg.epochs, "lr": tcfg.lr, "batch": tcfg.batch}
    save_model(model, args.out, meta)
    curves = args.curves or str(args.out) + ".losses.csv"
    hist.write_csv(curves)
    final = hist.val_loss[-1] if hist.val_loss else float("nan")
    print(f"trained {tcfg.preset} model ({model.n_params()} parameters), final val loss {final:.6g} -> {args.out}")
    return 0


def _load_trajectory(path):
    if str(path).endswith(".csv"):
        return simio.read_trajectory(path)
    sensors, truth, _ = simio.read_dataset(path)
    if truth is None:
        raise DataError(f"{path} carries no ground truth")
    return simio.truth_arrays(truth)


def cmd_evaluate(args) -> int:
    t, est = _load_trajectory(args.estimate)
    t_truth, truth = _load_trajectory(args.truth)
    if len(t) != len(t_truth) or not np.allclose(t, t_truth, atol=1e-9):
        raise LengthMismatch("estimate and truth are not time-aligned")
    ate = eval_ate(est, truth)
    result = {"ATE": ate.as_dict()}
    for mode, window in (("time", args.window), ("distance", args.distance)):
        result[f"RE_{mode}"] = eval_re(est, truth, t, window, mode).as_dict()
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_bench(args) -> int:
    rows = bench_addmul(args.sizes, repeats=args.repeats, seed=args.seed)
    print(format_table(rows))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("batch,add_s,mul_s,ratio\n")
            for r in rows:
                fh.write(f"{r.batch},{r.add_s!r},{r.mul_s!r},{r.ratio!r}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="innkf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic dataset")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--duration", type=float, default=100.0, help="seconds (default 100)")
    s.add_argument("--terrain", choices=["flat", "stairs", "slope", "uneven", "discrete_obstacle", "composite"])
    s.add_argument("--config", help="INI file with [sensor], [gait], [terrain] sections")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="run the filter (and optionally a compensator)")
    e.add_argument("--dataset", required=True)
    e.add_argument("--model")
    e.add_argument("--config", help="INI file with [noise], [contact], [filter] sections")
    e.add_argument("--out-dir", required=True)
    e.set_defaults(func=cmd_estimate)

    t = sub.add_parser("train", help="train a compensator on datasets with ground truth")
    t.add_argument("--dataset", nargs="+", required=True)
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--preset", choices=["full", "desk", "tiny"])
    t.add_argument("--epochs", type=int)
    t.add_argument("--stride", type=int, help="use every n-th tick as a training window")
    t.add_argument("--jobs", type=int, default=1, help="parallel filter runs during preparation")
    t.add_argument("--config", help="INI file with [noise], [contact], [filter], [loss], [train]")
    t.add_argument("--out", required=True)
    t.add_argument("--curves", help="loss-curve CSV (default: <out>.losses.csv)")
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("evaluate", help="ATE/RE of an estimate against ground truth")
    v.add_argument("--estimate", required=True, help="trajectory CSV")
    v.add_argument("--truth", required=True, help="dataset file or trajectory CSV")
    v.add_argument("--window", type=float, default=RE_TIME_WINDOW, help="RE time window [s]")
    v.add_argument("--distance", type=float, default=RE_DISTANCE_WINDOW, help="RE distance window [m]")
    v.add_argument("--report")
    v.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("bench", help="batched 5x5 addition vs multiplication timing")
    b.add_argument("--sizes", type=int, nargs="+", default=list(DEFAULT_SIZES))
    b.add_argument("--repeats", type=int, default=200)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--csv")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    level = os.environ.get("INNKF_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InnkfError as exc:
        print(f"innkf {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code if exc.exit_code in (2, 3, 4) else 4
    except FileNotFoundError as exc:
        print(f"innkf {args.command}: error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError) as exc:
        print(f"innkf {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"innkf {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
