"""Multi-seed experiment driver and trace file IO.

One trace file per seed plus one aggregate file per experiment. CSV column
order is fixed: round,evals,best_feasible,regret,feasibility_ratio,seconds.
JSONL mirrors the same fields, one object per row. `seconds` is cumulative
wall time since run start under the injected clock; every other field is
bit-deterministic for a given seed and build. `best_feasible` is nan (null in
JSONL) until the first feasible evaluation. Aggregates are recomputed from
the per-seed files on disk, mean and population std per round.
"""

from __future__ import annotations

import json
import math
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .config import ExperimentConfig
from .loop import TRACE_COLUMNS, TraceRow, run_optimization, run_random_search

__all__ = [
    "ExperimentResult",
    "run_experiment",
    "write_trace",
    "read_trace",
    "aggregate_rows",
    "write_aggregate",
    "read_aggregate",
]

AGG_COLUMNS = (
    "round",
    "evals",
    "regret_mean",
    "regret_std",
    "feasibility_ratio_mean",
    "feasibility_ratio_std",
)


def _fmt(value: float | None) -> str:
    if value is None:
        return "nan"
    return repr(float(value))


def write_trace(path: Path, rows: list[TraceRow], fmt: str) -> None:
    path = Path(path)
    lines: list[str] = []
    if fmt == "csv":
        lines.append(",".join(TRACE_COLUMNS))
        for r in rows:
            lines.append(
                f"{r.round},{r.evals},{_fmt(r.best_feasible)},{_fmt(r.regret)},"
                f"{_fmt(r.feasibility_ratio)},{_fmt(r.seconds)}"
            )
    elif fmt == "jsonl":
        for r in rows:
            lines.append(
                json.dumps(
                    {
                        "round": r.round,
                        "evals": r.evals,
                        "best_feasible": r.best_feasible,
                        "regret": r.regret,
                        "feasibility_ratio": r.feasibility_ratio,
                        "seconds": r.seconds,
                    }
                )
            )
    else:
        raise ValueError(f"unknown trace format {fmt!r}")
    path.write_text("\n".join(lines) + "\n")


def read_trace(path: Path) -> list[TraceRow]:
    """Parse a trace file back; format inferred from the extension."""
    path = Path(path)
    rows: list[TraceRow] = []
    text = path.read_text().strip().splitlines()
    if path.suffix == ".jsonl":
        for line in text:
            obj = json.loads(line)
            rows.append(TraceRow(**obj))
        return rows
    header, *body = text
    if header.split(",") != list(TRACE_COLUMNS):
        raise ValueError(f"unexpected trace header {header!r}")
    for line in body:
        parts = line.split(",")
        bf = float(parts[2])
        rows.append(
            TraceRow(
                round=int(parts[0]),
                evals=int(parts[1]),
                best_feasible=None if math.isnan(bf) else bf,
                regret=float(parts[3]),
                feasibility_ratio=float(parts[4]),
                seconds=float(parts[5]),
            )
        )
    return rows


def aggregate_rows(per_seed: list[list[TraceRow]]) -> list[dict]:
    """Round-by-round mean and population std across seeds."""
    if not per_seed:
        raise ValueError("no traces to aggregate")
    lengths = {len(rows) for rows in per_seed}
    if len(lengths) != 1:
        raise ValueError(f"trace lengths differ across seeds: {sorted(lengths)}")
    out = []
    for i in range(lengths.pop()):
        rounds = {rows[i].round for rows in per_seed}
        evals = {rows[i].evals for rows in per_seed}
        if len(rounds) != 1 or len(evals) != 1:
            raise ValueError("seed traces disagree on round/evals structure")
        regrets = np.array([rows[i].regret for rows in per_seed])
        ratios = np.array([rows[i].feasibility_ratio for rows in per_seed])
        out.append(
            {
                "round": rounds.pop(),
                "evals": evals.pop(),
                "regret_mean": float(regrets.mean()),
                "regret_std": float(regrets.std()),
                "feasibility_ratio_mean": float(ratios.mean()),
                "feasibility_ratio_std": float(ratios.std()),
            }
        )
    return out


def write_aggregate(path: Path, agg: list[dict], fmt: str) -> None:
    path = Path(path)
    lines = []
    if fmt == "csv":
        lines.append(",".join(AGG_COLUMNS))
        for row in agg:
            lines.append(
                f"{row['round']},{row['evals']},"
                + ",".join(_fmt(row[k]) for k in AGG_COLUMNS[2:])
            )
    elif fmt == "jsonl":
        for row in agg:
            lines.append(json.dumps({k: row[k] for k in AGG_COLUMNS}))
    else:
        raise ValueError(f"unknown trace format {fmt!r}")
    path.write_text("\n".join(lines) + "\n")


def read_aggregate(path: Path) -> list[dict]:
    path = Path(path)
    text = path.read_text().strip().splitlines()
    if path.suffix == ".jsonl":
        return [json.loads(line) for line in text]
    header, *body = text
    if header.split(",") != list(AGG_COLUMNS):
        raise ValueError(f"unexpected aggregate header {header!r}")
    out = []
    for line in body:
        parts = line.split(",")
        row = {"round": int(parts[0]), "evals": int(parts[1])}
        for key, val in zip(AGG_COLUMNS[2:], parts[2:]):
            row[key] = float(val)
        out.append(row)
    return out


@dataclass
class ExperimentResult:
    seed_paths: dict[int, Path] = field(default_factory=dict)
    rows: dict[int, list[TraceRow]] = field(default_factory=dict)
    failures: dict[int, str] = field(default_factory=dict)
    aggregate_path: Path | None = None


def run_experiment(
    exp: ExperimentConfig, clock: Callable[[], float] | None = None
) -> ExperimentResult:
    """Run every seed sequentially, writing one trace file each.

    A failing seed gets its partial trace flushed plus a .error.txt with the
    traceback; remaining seeds still run. The aggregate covers completed seeds
    and is recomputed from the files just written.
    """
    out_dir = Path(exp.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{exp.method}_{exp.run.problem}-{exp.run.dim}d"
    ext = exp.trace_format
    result = ExperimentResult()

    for seed in range(exp.run.seed, exp.run.seed + exp.seeds):
        cfg = exp.run_config_for_seed(seed)
        collected: list[TraceRow] = []
        path = out_dir / f"{stem}_seed{seed}.{ext}"
        try:
            if exp.method == "cibo":
                run_optimization(cfg, clock=clock, row_callback=collected.append)
            else:
                run_random_search(cfg, clock=clock, row_callback=collected.append)
        except Exception:
            write_trace(path, collected, ext)
            err_path = out_dir / f"{stem}_seed{seed}.error.txt"
            err_path.write_text(traceback.format_exc())
            result.failures[seed] = traceback.format_exc(limit=1)
            result.seed_paths[seed] = path
            result.rows[seed] = collected
            continue
        write_trace(path, collected, ext)
        result.seed_paths[seed] = path
        result.rows[seed] = collected

    completed = [s for s in result.seed_paths if s not in result.failures]
    if completed:
        reread = [read_trace(result.seed_paths[s]) for s in completed]
        try:
            agg = aggregate_rows(reread)
        except ValueError:
            agg = None
        if agg is not None:
            agg_path = out_dir / f"{stem}_agg.{ext}"
            write_aggregate(agg_path, agg, ext)
            result.aggregate_path = agg_path
    return result
