"""Multi-seed experiment harness: sweeps, aggregation, plot-ready CSV."""

from __future__ import annotations

import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig
from .trainer import train

EPISODE_HEADER = ("episode", "return", "steps", "requests", "cum_requests")
STEP_HEADER = (
    "episode", "step", "action", "requested", "fused_conf", "reg_mult", "n",
    "reward_or_imputed", "source",
)
SUMMARY_HEADER = (
    "variant", "seeds", "median_score", "q25_score", "q75_score",
    "median_rewards", "q25_rewards", "q75_rewards", "min_rewards", "max_rewards",
    "converged_runs",
)
CURVE_HEADER = ("variant", "episode", "mean_return", "ci_low", "ci_high")
BOXPLOT_HEADER = ("variant", "metric", "q25", "median", "q75", "whisker_low", "whisker_high")


def log_level() -> str:
    level = os.environ.get("CGR_LOG", "info")
    if level not in ("quiet", "info", "trace"):
        raise ValueError(f"CGR_LOG must be quiet/info/trace, got {level!r}")
    return level


def _info(msg):
    if log_level() != "quiet":
        print(msg, file=sys.stderr)


@dataclass
class RunRecord:
    variant: str
    seed: int
    episodes: list  # rows matching EPISODE_HEADER
    best_score: float
    converged: bool
    converged_score: Optional[float]
    rewards_to_converge: Optional[int]
    steps_log: list = None
    error: Optional[str] = None


def execute_run(config: ExperimentConfig, seed) -> RunRecord:
    log_steps = log_level() == "trace"
    try:
        result = train(config, seed, log_steps=log_steps)
    except Exception as e:  # recorded, sweep continues
        return RunRecord(config.name, seed, [], float("nan"), False, None, None, error=str(e))
    rows = [(m.episode, m.ret, m.steps, m.requests, m.cum_requests) for m in result.metrics]
    best = max(m.ret for m in result.metrics)
    steps_rows = [
        (s.episode, s.step, _fmt_action(s.action), int(s.requested), s.fused_conf,
         s.reg_mult, s.n, s.reward_or_imputed, s.source)
        for s in result.steps_log
    ]
    return RunRecord(
        config.name, seed, rows, best, result.converged,
        result.converged_score, result.rewards_to_converge, steps_rows,
    )


def _fmt_action(action):
    if isinstance(action, (int, np.integer)):
        return int(action)
    return ";".join(repr(float(a)) for a in np.atleast_1d(action))


def _run_job(args):
    config, seed = args
    return execute_run(config, seed)


def run_sweep(variants, seeds, jobs=1, out_dir=None) -> list[RunRecord]:
    """Run every (variant, seed) pair; output is independent of `jobs`."""
    tasks = [(cfg, seed) for cfg in variants for seed in seeds]
    if jobs <= 1:
        records = [_run_job(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_job, tasks))
    for r in records:
        status = f"error: {r.error}" if r.error else (
            "converged" if r.converged else "cap reached")
        _info(f"run {r.variant} seed={r.seed}: {status}")
    if out_dir is not None:
        write_runs(records, out_dir)
    return records


INDEX_HEADER = ("variant", "seed", "best_score", "converged", "converged_score",
                "rewards_to_converge")


def write_runs(records, out_dir):
    runs_dir = Path(out_dir) / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    index_rows = []
    for r in records:
        if r.error:
            (runs_dir / f"{r.variant}__seed{r.seed}.error").write_text(r.error + "\n")
            continue
        path = runs_dir / f"{r.variant}__seed{r.seed}.csv"
        _write_csv(path, EPISODE_HEADER, r.episodes)
        if r.steps_log:
            _write_csv(runs_dir / f"{r.variant}__seed{r.seed}_steps.csv",
                       STEP_HEADER, r.steps_log)
        index_rows.append((
            r.variant, r.seed, r.best_score, int(r.converged),
            float("nan") if r.converged_score is None else r.converged_score,
            -1 if r.rewards_to_converge is None else r.rewards_to_converge,
        ))
    _write_csv(runs_dir / "index.csv", INDEX_HEADER, index_rows)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(c) for c in row])


def _cell(c):
    if isinstance(c, float):
        return repr(c)
    return c


def _quantiles(values):
    v = np.asarray(values, dtype=np.float64)
    return tuple(float(np.quantile(v, q)) for q in (0.25, 0.5, 0.75))


def _whiskers(values):
    v = np.asarray(values, dtype=np.float64)
    q25, _, q75 = _quantiles(v)
    iqr = q75 - q25
    inliers = v[(v >= q25 - 1.5 * iqr) & (v <= q75 + 1.5 * iqr)]
    return float(inliers.min()), float(inliers.max())


def summarize(records) -> list[tuple]:
    """One SUMMARY_HEADER row per variant, in first-seen variant order."""
    order = []
    by_variant = {}
    for r in records:
        if r.error:
            continue
        if r.variant not in by_variant:
            by_variant[r.variant] = []
            order.append(r.variant)
        by_variant[r.variant].append(r)
    rows = []
    for name in order:
        runs = sorted(by_variant[name], key=lambda r: r.seed)
        scores = [r.best_score for r in runs]
        q25s, meds, q75s = _quantiles(scores)
        conv = [r.rewards_to_converge for r in runs if r.converged]
        if conv:
            q25r, medr, q75r = _quantiles(conv)
            lo, hi = _whiskers(conv)
        else:
            q25r = medr = q75r = lo = hi = float("nan")
        rows.append((name, len(runs), meds, q25s, q75s, medr, q25r, q75r, lo, hi, len(conv)))
    return rows


def learning_curves(records) -> list[tuple]:
    """Per-variant mean return by episode with normal-approximation 95% CI."""
    order = []
    by_variant = {}
    for r in records:
        if r.error:
            continue
        by_variant.setdefault(r.variant, []) or order.append(r.variant)
        by_variant[r.variant].append(r)
    rows = []
    for name in order:
        runs = sorted(by_variant[name], key=lambda r: r.seed)
        longest = max(len(r.episodes) for r in runs)
        for ep in range(longest):
            vals = np.array([r.episodes[ep][1] for r in runs if len(r.episodes) > ep])
            mean = float(vals.mean())
            if len(vals) > 1:
                half = 1.96 * float(vals.std(ddof=1)) / np.sqrt(len(vals))
            else:
                half = 0.0
            rows.append((name, ep, mean, mean - half, mean + half))
    return rows


def boxplot_rows(records) -> list[tuple]:
    rows = []
    order = []
    by_variant = {}
    for r in records:
        if r.error:
            continue
        by_variant.setdefault(r.variant, []) or order.append(r.variant)
        by_variant[r.variant].append(r)
    for name in order:
        runs = sorted(by_variant[name], key=lambda r: r.seed)
        scores = [r.best_score for r in runs]
        q25, med, q75 = _quantiles(scores)
        lo, hi = _whiskers(scores)
        rows.append((name, "score", q25, med, q75, lo, hi))
        conv = [r.rewards_to_converge for r in runs if r.converged]
        if conv:
            q25, med, q75 = _quantiles(conv)
            lo, hi = _whiskers(conv)
            rows.append((name, "rewards_to_converge", q25, med, q75, lo, hi))
    return rows


def write_report(records, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "summary.csv", SUMMARY_HEADER, summarize(records))
    _write_csv(out / "curves.csv", CURVE_HEADER, learning_curves(records))
    _write_csv(out / "boxplot.csv", BOXPLOT_HEADER, boxplot_rows(records))


def load_runs(in_dir) -> list[RunRecord]:
    """Rebuild run records from the CSVs under <in_dir>/runs."""
    runs_dir = Path(in_dir) / "runs"
    index = {}
    index_path = runs_dir / "index.csv"
    if index_path.exists():
        with open(index_path, newline="") as f:
            reader = csv.reader(f)
            if tuple(next(reader)) != INDEX_HEADER:
                raise ValueError(f"corrupt index {index_path}: bad header")
            for variant, seed, best, conv, cscore, rtc in reader:
                index[(variant, int(seed))] = (
                    bool(int(conv)),
                    None if cscore == "nan" else float(cscore),
                    None if int(rtc) < 0 else int(rtc),
                )
    paths = [p for p in runs_dir.glob("*__seed*.csv")
             if not p.name.endswith("_steps.csv")]
    # keep the sweep's variant/seed ordering when an index is present
    order = {key: i for i, key in enumerate(index)}

    def key(path):
        variant, seed_part = path.stem.rsplit("__seed", 1)
        return (order.get((variant, int(seed_part)), len(order)), path.name)

    records = []
    for path in sorted(paths, key=key):
        variant, seed_part = path.stem.rsplit("__seed", 1)
        with open(path, newline="") as f:
            reader = csv.reader(f)
            if tuple(next(reader)) != EPISODE_HEADER:
                raise ValueError(f"corrupt run log {path}: bad header")
            rows = [(int(e), float(ret), int(st), int(rq), int(cum))
                    for e, ret, st, rq, cum in reader]
        if not rows:
            raise ValueError(f"corrupt run log {path}: empty")
        conv, cscore, rtc = index.get((variant, int(seed_part)), (False, None, None))
        records.append(RunRecord(
            variant, int(seed_part), rows, max(r[1] for r in rows),
            converged=conv, converged_score=cscore, rewards_to_converge=rtc,
        ))
    if not records:
        raise FileNotFoundError(f"no run logs under {runs_dir}")
    return records
