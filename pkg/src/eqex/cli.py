"""Experiment orchestration: calibrate, train, sweep, report.

All outputs are CSV/JSON. The sweep emits one row per (eta, beta, seed)
cell plus a trend report of Spearman signs of each output against eta at
fixed beta and against beta at fixed eta.
"""

from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import replace
import argparse
import csv
import json
import os
import sys

import numpy as np
from scipy import stats

from .config import ExperimentConfig, load_config, config_from_dict
from .kernel import GROUP_CONSUMER, GROUP_MM, run_episode
from .learn import Calibration, Discretizer, calibrate, greedy_policy, train
from .mechanism import (ConfigError, EX_STATE_COMPONENTS, MM_STATE_COMPONENTS)

SWEEP_FIELDS = ["eta", "beta", "seed", "avg_fee", "avg_incentive",
                "mm_profit", "exchange_profit", "consumer_mean_profit",
                "final_neg_gew", "status", "reason"]

CURVE_FIELDS = ["episode", "alpha", "epsilon", "updated",
                "mm_reward", "ex_reward", "ex_profit", "ex_equity"]

REPORT_PANELS = ["avg_fee", "avg_incentive", "mm_profit",
                 "exchange_profit", "consumer_mean_profit", "final_neg_gew"]


def _load_or_default_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return load_config(path)


def cmd_calibrate(args) -> int:
    config = _load_or_default_config(args.config)
    cal = calibrate(config, args.seed, args.episodes)
    cal.save(args.out)
    print(f"calibration written to {args.out}")
    for name, (lo, hi) in sorted(cal.bounds.items()):
        tag = " (degenerate)" if name in cal.degenerate else ""
        print(f"  {name}: observed range [{lo:.6g}, {hi:.6g}]{tag}")
    for name, (lo, hi) in sorted(cal.reward_bounds.items()):
        print(f"  {name}: reward range [{lo:.6g}, {hi:.6g}]")
    return 0


def run_cell(config: ExperimentConfig, eta: float, beta: float, seed: int,
             out_dir: str, calibration: Calibration | None = None) -> dict:
    """Train one (eta, beta, seed) cell and evaluate its greedy policies."""
    cfg = replace(config, weights=replace(config.weights, eta=eta, beta=beta))
    if calibration is None:
        calibration = calibrate(cfg, seed)
    result = train(cfg, seed, calibration)

    os.makedirs(out_dir, exist_ok=True)
    tag = f"eta{eta:g}_beta{beta:g}_seed{seed}"
    curve_path = os.path.join(out_dir, f"curve_{tag}.csv")
    write_curve_csv(curve_path, result.curve)
    result.q_mm.save(os.path.join(out_dir, f"qmm_{tag}.jsonl"))
    result.q_ex.save(os.path.join(out_dir, f"qex_{tag}.jsonl"))

    disc_mm = Discretizer(calibration, MM_STATE_COMPONENTS)
    disc_ex = Discretizer(calibration, EX_STATE_COMPONENTS)
    ex_policy = greedy_policy(result.q_ex, disc_ex)
    mm_policy = greedy_policy(result.q_mm, disc_mm)
    # average the greedy policies over several eval episodes; a single
    # episode is too noisy for the cross-cell trend comparisons
    mm_profit, exchange_profit, consumer_mean, neg_gew = [], [], [], []
    for k in range(max(1, cfg.eval_episodes)):
        eval_ep = run_episode(cfg, seed * 100_003 + cfg.schedule.total_episodes + k,
                              ex_policy=ex_policy, mm_policy=mm_policy)
        consumer_mean.append(np.mean([p for a, p in eval_ep.final_profits.items()
                                      if eval_ep.groups[a] == GROUP_CONSUMER]))
        mm_profit.append(np.sum([p for a, p in eval_ep.final_profits.items()
                                 if eval_ep.groups[a] == GROUP_MM]))
        exchange_profit.append(eval_ep.exchange_cash / 10_000)   # dollars
        neg_gew.append(eval_ep.final_neg_gew)
    return {
        "eta": eta, "beta": beta, "seed": seed,
        "avg_fee": result.avg_ex_action[0],
        "avg_incentive": result.avg_ex_action[1],
        "mm_profit": float(np.mean(mm_profit)),
        "exchange_profit": float(np.mean(exchange_profit)),
        "consumer_mean_profit": float(np.mean(consumer_mean)),
        "final_neg_gew": float(np.mean(neg_gew)),
        "status": "ok", "reason": "",
    }


def write_curve_csv(path: str, curve) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CURVE_FIELDS)
        w.writeheader()
        for pt in curve:
            w.writerow({k: getattr(pt, k) for k in CURVE_FIELDS})


def cmd_train(args) -> int:
    config = _load_or_default_config(args.config)
    if args.calibration:
        calibration = Calibration.load(args.calibration)
    elif config.calibration_path:
        calibration = Calibration.load(config.calibration_path)
    else:
        print("error: no calibration file; run `calibrate` first and pass "
              "--calibration", file=sys.stderr)
        return 2
    row = run_cell(config, args.eta, args.beta, args.seed, args.out_dir,
                   calibration)
    summary_path = os.path.join(args.out_dir, "train_summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(row, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"run complete; summary at {summary_path}")
    return 0


def _cell_worker(config_dict, eta, beta, seed, out_dir):
    config = config_from_dict(config_dict)
    try:
        return run_cell(config, eta, beta, seed, out_dir)
    except Exception as exc:   # failed cells are reported, never dropped
        return {"eta": eta, "beta": beta, "seed": seed,
                "avg_fee": "", "avg_incentive": "", "mm_profit": "",
                "exchange_profit": "", "consumer_mean_profit": "",
                "final_neg_gew": "", "status": "failed",
                "reason": f"{type(exc).__name__}: {exc}"}


def run_sweep(config: ExperimentConfig, etas, betas, seeds, out_dir,
              workers: int = 1) -> list[dict]:
    cells = [(eta, beta, seed) for beta in betas for eta in etas
             for seed in seeds]
    rows = []
    if workers <= 1:
        for eta, beta, seed in cells:
            rows.append(_cell_worker(config.to_dict(), eta, beta, seed, out_dir))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {pool.submit(_cell_worker, config.to_dict(), eta, beta,
                                seed, out_dir): (eta, beta, seed)
                    for eta, beta, seed in cells}
            for fut in as_completed(futs):
                rows.append(fut.result())
    rows.sort(key=lambda r: (r["beta"], r["eta"], r["seed"]))
    return rows


def spearman_sign(xs, ys) -> int:
    """Sign of the Spearman rank correlation; 0 when undefined or exactly 0."""
    if len(set(xs)) < 2 or len(set(ys)) < 2:
        return 0
    rho = stats.spearmanr(xs, ys).statistic
    if np.isnan(rho) or rho == 0:
        return 0
    return 1 if rho > 0 else -1


def trend_report(rows: list[dict]) -> dict:
    """Spearman sign of each output vs eta at fixed beta, and vs beta at
    fixed eta, per seed and pooled."""
    ok = [r for r in rows if r["status"] == "ok"]
    report = {"vs_eta": {}, "vs_beta": {}}
    betas = sorted({r["beta"] for r in ok})
    etas = sorted({r["eta"] for r in ok})
    seeds = sorted({r["seed"] for r in ok})
    for out in REPORT_PANELS:
        report["vs_eta"][out] = {}
        for beta in betas:
            sub = [r for r in ok if r["beta"] == beta]
            per_seed = {str(s): spearman_sign(
                [r["eta"] for r in sub if r["seed"] == s],
                [r[out] for r in sub if r["seed"] == s]) for s in seeds}
            pooled = spearman_sign([r["eta"] for r in sub],
                                   [r[out] for r in sub])
            report["vs_eta"][out][str(beta)] = {"per_seed": per_seed,
                                                "pooled": pooled}
        report["vs_beta"][out] = {}
        for eta in etas:
            sub = [r for r in ok if r["eta"] == eta]
            per_seed = {str(s): spearman_sign(
                [r["beta"] for r in sub if r["seed"] == s],
                [r[out] for r in sub if r["seed"] == s]) for s in seeds}
            pooled = spearman_sign([r["beta"] for r in sub],
                                   [r[out] for r in sub])
            report["vs_beta"][out][str(eta)] = {"per_seed": per_seed,
                                                "pooled": pooled}
    return report


def write_sweep_outputs(rows, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "sweep.csv"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS)
        w.writeheader()
        w.writerows(rows)
    with open(os.path.join(out_dir, "sweep.json"), "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "trends.json"), "w", encoding="utf-8") as fh:
        json.dump(trend_report(rows), fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_sweep(args) -> int:
    config = _load_or_default_config(args.config)
    etas = [float(x) for x in args.etas.split(",")]
    betas = [float(x) for x in args.betas.split(",")]
    seeds = [int(x) for x in args.seeds.split(",")]
    rows = run_sweep(config, etas, betas, seeds, args.out_dir, args.workers)
    write_sweep_outputs(rows, args.out_dir)
    failed = [r for r in rows if r["status"] != "ok"]
    print(f"sweep complete: {len(rows) - len(failed)}/{len(rows)} cells ok; "
          f"outputs in {args.out_dir}")
    for r in failed:
        print(f"  failed cell eta={r['eta']} beta={r['beta']} "
              f"seed={r['seed']}: {r['reason']}", file=sys.stderr)
    return 0 if not failed else 1


def read_sweep_csv(path: str) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(SWEEP_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for i, raw in enumerate(reader, start=2):
            row = dict(raw)
            for k in ("eta", "beta"):
                try:
                    row[k] = float(row[k])
                except ValueError as exc:
                    raise ValueError(f"{path} line {i}: bad {k}") from exc
            try:
                row["seed"] = int(row["seed"])
            except ValueError as exc:
                raise ValueError(f"{path} line {i}: bad seed") from exc
            for k in REPORT_PANELS:
                row[k] = float(row[k]) if row[k] != "" else None
            rows.append(row)
    return rows


def cmd_report(args) -> int:
    rows = read_sweep_csv(args.sweep_csv)
    os.makedirs(args.out_dir, exist_ok=True)
    for panel in REPORT_PANELS:
        vals = [abs(r[panel]) for r in rows if r[panel] is not None]
        scale = max(vals) if vals else 0.0
        path = os.path.join(args.out_dir, f"panel_{panel}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["eta", "beta", "seed", "value", "normalized"])
            for r in rows:
                v = r[panel]
                if v is None:
                    w.writerow([r["eta"], r["beta"], r["seed"], "", ""])
                else:
                    w.writerow([r["eta"], r["beta"], r["seed"], v,
                                v / scale if scale > 0 else 0.0])
    print(f"panel files written to {args.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="eqex",
        description="Equitable-fee exchange simulator experiment harness")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", help="derive normalization bounds and "
                       "state bins from a random-policy sample run")
    c.add_argument("--config")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--episodes", type=int, default=None)
    c.add_argument("--out", default="calibration.json")
    c.set_defaults(func=cmd_calibrate)

    t = sub.add_parser("train", help="train one (eta, beta, seed) cell")
    t.add_argument("--config")
    t.add_argument("--calibration")
    t.add_argument("--eta", type=float, default=0.0)
    t.add_argument("--beta", type=float, default=0.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out-dir", default="runs")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="run an (eta, beta, seed) grid")
    s.add_argument("--config")
    s.add_argument("--etas", default="0,1,10,100,1000,10000")
    s.add_argument("--betas", default="0.0,0.3,0.5,0.6,1.0")
    s.add_argument("--seeds", default="0")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out-dir", default="runs")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="emit plot-ready per-panel CSVs")
    r.add_argument("--sweep-csv", required=True)
    r.add_argument("--out-dir", default="report")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
