"""Sweeps over mode x load x seed and their CSV outputs."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .config import ScenarioConfig
from .metrics import LOSS_CAUSES, RESIDUAL_CAUSES, confidence_interval, throughput_gain
from .network import RunResult, simulate
from .scheduler import Mode

MODE_ORDER = {m: i for i, m in enumerate(Mode)}

RUN_FIELDS = (
    "mode", "load", "seed", "generated", "delivered", "pdr", "sensor_pdr", "meter_pdr",
    "e2e_mean_s", "e2e_p95_s", "sensor_e2e_mean_s", "meter_e2e_mean_s",
    "dev_queue_delay_s", "router_queue_delay_s", "throughput_pps",
    "sensor_losses", "meter_losses", "meter_expired",
    *LOSS_CAUSES, *RESIDUAL_CAUSES,
    "bursts", "clean_bursts", "eq3_mismatches", "late_payloads", "bb_windows", "bb_violations",
    "lowpan_tx_starts", "balanced", "events",
)

SUMMARY_FIELDS = (
    "mode", "load", "runs", "pdr_mean", "pdr_ci95", "e2e_mean_s", "e2e_ci95",
    "throughput_mean_pps", "throughput_ci95", "sensor_pdr_mean", "meter_pdr_mean",
    "meter_losses_mean", "losses_mean", "gain_pps", "alpha",
)


class SweepError(RuntimeError):
    """A run failed; the rows finished before it are already on disk."""


def fmt(v) -> str:
    """Fixed text form for CSV cells: 9 significant digits, empty for absent values."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, Mode):
        return v.value
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def run_row(r: RunResult) -> dict:
    s, c = r.summary, r.checks
    row = {"mode": r.mode, "load": float(r.load), "seed": r.seed}
    for k in RUN_FIELDS[3:18]:
        row[k] = getattr(s, k)
    row.update(s.ledger.as_dict())
    for k in ("bursts", "clean_bursts", "eq3_mismatches", "late_payloads", "bb_windows",
              "bb_violations", "lowpan_tx_starts"):
        row[k] = getattr(c, k)
    row["balanced"] = r.balanced
    row["events"] = r.events
    return row


def _row_key(row: dict):
    return MODE_ORDER[row["mode"]], row["load"], row["seed"]


def write_csv(path: Path, fieldnames: Iterable[str], rows: list[dict]):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(fieldnames)
    w.writerow(names)
    for row in rows:
        w.writerow([fmt(row.get(k)) for k in names])
    path.write_text(buf.getvalue())


def summarize_rows(rows: list[dict]) -> list[dict]:
    """Mean and 95% half-width per mode x load; gain is taken against NONE at the same load."""
    groups: dict[tuple, list[dict]] = {}
    for row in sorted(rows, key=_row_key):
        groups.setdefault((row["mode"], row["load"]), []).append(row)

    def ci(rs, key):
        xs = [r[key] for r in rs if r[key] is not None]
        return confidence_interval(xs) if xs else None

    out = []
    for (mode, load), rs in groups.items():
        pdr, e2e, thr = ci(rs, "pdr"), ci(rs, "e2e_mean_s"), ci(rs, "throughput_pps")
        sp, mp = ci(rs, "sensor_pdr"), ci(rs, "meter_pdr")
        row = {
            "mode": mode, "load": load, "runs": len(rs),
            "pdr_mean": pdr and pdr.mean, "pdr_ci95": pdr and pdr.half_width,
            "e2e_mean_s": e2e and e2e.mean, "e2e_ci95": e2e and e2e.half_width,
            "throughput_mean_pps": thr and thr.mean, "throughput_ci95": thr and thr.half_width,
            "sensor_pdr_mean": sp and sp.mean, "meter_pdr_mean": mp and mp.mean,
            "meter_losses_mean": sum(r["meter_losses"] for r in rs) / len(rs),
            "losses_mean": sum(sum(r[c] for c in LOSS_CAUSES) for r in rs) / len(rs),
            "gain_pps": None, "alpha": None,
        }
        base = groups.get((Mode.NONE, load))
        if mode is not Mode.NONE and base and thr is not None:
            g, a = throughput_gain(thr.mean, confidence_interval([r["throughput_pps"] for r in base]).mean)
            row["gain_pps"], row["alpha"] = g, a
        out.append(row)
    return out


def trace_name(mode: Mode, load: float, seed: int) -> str:
    return f"trace-{mode.value}-{fmt(float(load))}-{seed}.log"


def write_trace(path: Path, lines: list[tuple]):
    with path.open("w") as f:
        for t, node, kind, pid, detail in lines:
            f.write(f"{t} {node} {kind} {pid} {detail}\n")


@dataclass
class SweepResult:
    rows: list[dict]
    summary: list[dict]
    results: list[RunResult]


def _one(args) -> RunResult:
    cfg, mode, load, seed, trace = args
    return simulate(cfg, mode, load, seed, trace=trace)


def sweep_jobs(cfg: ScenarioConfig) -> list[tuple[Mode, float, int]]:
    s = cfg.scenario
    return [(m, float(l), sd) for m in s.modes for l in s.loads for sd in s.seeds]


def run_experiment(cfg: ScenarioConfig, out: Path | str | None = None, trace: bool = False,
                   jobs: int = 1, order: list[tuple[Mode, float, int]] | None = None,
                   progress: Callable[[RunResult], None] | None = None) -> SweepResult:
    """Run every (mode, load, seed) and, when ``out`` is given, write runs.csv and summary.csv.

    ``order`` permutes the runs; results do not depend on it because each run owns
    its engine and seeds, and rows are sorted before writing.
    """
    todo = order if order is not None else sweep_jobs(cfg)
    outdir = Path(out) if out is not None else None
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
    results: list[RunResult] = []

    def keep(r: RunResult):
        results.append(r)
        if outdir is not None and trace and r.trace is not None:
            write_trace(outdir / trace_name(r.mode, r.load, r.seed), r.trace)
            r.trace = None
        if progress is not None:
            progress(r)

    def flush():
        rows = sorted((run_row(r) for r in results), key=_row_key)
        summary = summarize_rows(rows)
        if outdir is not None:
            write_csv(outdir / "runs.csv", RUN_FIELDS, rows)
            write_csv(outdir / "summary.csv", SUMMARY_FIELDS, summary)
        return rows, summary

    args = [(cfg, m, l, sd, trace) for m, l, sd in todo]
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for r in pool.map(_one, args):
                    keep(r)
        else:
            for a in args:
                keep(_one(a))
    except Exception as e:
        flush()
        raise SweepError(f"run failed after {len(results)} of {len(args)} runs: {e}") from e
    rows, summary = flush()
    return SweepResult(rows, summary, results)
