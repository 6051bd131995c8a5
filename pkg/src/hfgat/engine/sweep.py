"""Experiment grids: sweeps, attack grids and privacy grids.

Cells run in a process pool capped by ``HFGAT_THREADS``; each cell's row is
written atomically to ``cells/`` and the final CSVs are merged in grid order,
so output files do not depend on completion order.
"""

from __future__ import annotations

import csv
import io
import json
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from .config import Pipeline, Scenario
from .metrics import CSV_COLUMNS, SCHEMA_VERSION, csv_row, fmt
from .runner import run_scenario

Axis = Literal["n_uavs", "byzantine_fraction", "threat_level"]
AXIS_FIELD = {"n_uavs": "n_uavs", "byzantine_fraction": "adversary.byzantine_fraction",
              "threat_level": "threat.pinned"}
GRID_COLUMNS = ["axis", "axis_value", "status", "error"] + CSV_COLUMNS
SUMMARY_METRICS = ["collision_rate", "mission_success_rate", "latency_p50_ms", "latency_p95_ms",
                   "messages_total", "rejected_gradients", "final_model_loss", "mean_epsilon"]


class SweepSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    axis: Axis
    values: list[float] = Field(min_length=1)
    pipelines: list[Pipeline] = Field(min_length=1)
    seeds_per_cell: int = Field(1, ge=1)
    base: dict = Field(default_factory=dict)
    policies: list[Literal["adaptive", "static_low_eps", "static_high_eps"]] | None = None


@dataclass(frozen=True)
class Cell:
    axis: str
    value: float
    pipeline: str
    seed: int
    scenario: Scenario


def _axis_value(axis: str, value):
    return int(value) if axis == "n_uavs" else float(value)


def build_cells(spec: SweepSpec, base: Scenario) -> list[Cell]:
    cells = []
    first = base.seeds[0] if base.seeds else 0
    for value in spec.values:
        v = _axis_value(spec.axis, value)
        for pipeline in spec.pipelines:
            for policy in spec.policies or [None]:
                changes = {AXIS_FIELD[spec.axis]: v, "pipeline": pipeline}
                if policy is not None:
                    changes["privacy.policy"] = policy
                sc = base.updated(**changes)
                for s in range(spec.seeds_per_cell):
                    cells.append(Cell(spec.axis, v, pipeline, first + s, sc))
    return cells


def _run_cell(cell: Cell) -> list[str]:
    try:
        rep = run_scenario(cell.scenario, cell.seed)
        return [cell.axis, fmt(cell.value), "ok", ""] + csv_row(rep)
    except Exception as exc:  # a failed cell is recorded, the grid continues
        row = {c: "" for c in CSV_COLUMNS}
        row.update(schema_version=str(SCHEMA_VERSION), pipeline=cell.pipeline, seed=str(cell.seed),
                   n_uavs=str(cell.scenario.n_uavs), privacy_policy=cell.scenario.privacy.policy)
        return [cell.axis, fmt(cell.value), "failed", f"{type(exc).__name__}: {exc}"] + \
            [row[c] for c in CSV_COLUMNS]


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _rows_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def max_workers() -> int:
    env = os.environ.get("HFGAT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def run_cells(cells: list[Cell], out_dir: Path | None = None, workers: int | None = None) -> list[list[str]]:
    workers = workers or max_workers()
    if workers <= 1 or len(cells) <= 1:
        rows = [_run_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(cells))) as ex:
            rows = list(ex.map(_run_cell, cells))
    if out_dir is not None:
        cell_dir = out_dir / "cells"
        cell_dir.mkdir(parents=True, exist_ok=True)
        for k, row in enumerate(rows):
            _atomic_write(cell_dir / f"cell_{k:05d}.csv", _rows_text(GRID_COLUMNS, [row]))
    return rows


def summarize(rows: list[list[str]]) -> tuple[list[str], list[list[str]]]:
    """Mean and population stddev per ``(axis_value, pipeline, policy)`` over successful rows."""
    idx = {c: k for k, c in enumerate(GRID_COLUMNS)}

    def key_of(r):
        return r[idx["axis"]], r[idx["axis_value"]], r[idx["pipeline"]], r[idx["privacy_policy"]]

    groups: dict[tuple, list[list[str]]] = {}
    totals: dict[tuple, int] = {}
    order: list[tuple] = []
    for r in rows:
        key = key_of(r)
        if key not in groups:
            groups[key] = []
            totals[key] = 0
            order.append(key)
        totals[key] += 1
        if r[idx["status"]] == "ok":
            groups[key].append(r)
    cols = ["schema_version", "axis", "axis_value", "pipeline", "privacy_policy", "runs", "failed"]
    for m in SUMMARY_METRICS:
        cols += [f"{m}_mean", f"{m}_std"]
    out = []
    for key in order:
        ok = groups[key]
        line = [str(SCHEMA_VERSION), *key, str(len(ok)), str(totals[key] - len(ok))]
        for m in SUMMARY_METRICS:
            vals = [float(r[idx[m]]) for r in ok]
            if vals:
                line += [fmt(statistics.fmean(vals)), fmt(statistics.pstdev(vals))]
            else:
                line += ["", ""]
        out.append(line)
    return cols, out


def run_grid(spec: SweepSpec, base: Scenario, out_dir: str | Path, name: str = "sweep",
             workers: int | None = None) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_cells(build_cells(spec, base), out, workers)
    raw = out / f"{name}.csv"
    summary = out / f"{name}_summary.csv"
    _atomic_write(raw, _rows_text(GRID_COLUMNS, rows))
    cols, srows = summarize(rows)
    _atomic_write(summary, _rows_text(cols, srows))
    return raw, summary


def load_sweep_spec(path: str | Path) -> SweepSpec:
    data = json.loads(Path(path).read_text())
    return SweepSpec.model_validate(data)
