"""CSV and JSON artifacts shared by the library and the CLI.

Formats:
  trajectory CSV   t,x,y,u_applied      (jump instants appear twice: the
                                         pre-jump row, then the post-jump
                                         row carrying the release size)
  schedule CSV     day,size[,rule]
  control CSV      t,u_star,lambda1,lambda2
  phase-field CSV  x,y,dx,dy
  summaries        JSON with sorted keys; every summary embeds the
                   scenario seed and a hash of the full configuration so
                   reruns are byte-comparable.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .ocp import ContinuousControl, OCPSolution
from .sim import ImpulseSchedule, Trajectory


class ScheduleParseError(ValueError):
    """Malformed schedule file; message carries the offending line number."""


def write_trajectory_csv(path: Path, traj: Trajectory) -> None:
    rows: list[tuple[float, float, float, float]] = []
    jumps_by_time = {j.time: j for j in traj.jumps}
    emitted = set()
    u = traj.u_applied
    for i, t in enumerate(traj.times):
        t = float(t)
        jump = jumps_by_time.get(t)
        if jump is not None and t not in emitted:
            rows.append((t, jump.pre[0], jump.pre[1], 0.0))
            rows.append((t, jump.post[0], jump.post[1], float(jump.post[1] - jump.pre[1])))
            emitted.add(t)
            continue
        rate = float(u[i]) if u is not None else 0.0
        rows.append((t, float(traj.states[i, 0]), float(traj.states[i, 1]), rate))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "y", "u_applied"])
        for row in rows:
            writer.writerow([f"{v:.10g}" for v in row])


def write_schedule_csv(path: Path, sched: ImpulseSchedule, with_rule: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if with_rule:
            writer.writerow(["day", "size", "rule"])
            for t, size in sched.entries:
                writer.writerow([f"{t:.10g}", size, sched.rule_tag])
        else:
            writer.writerow(["day", "size"])
            for t, size in sched.entries:
                writer.writerow([f"{t:.10g}", size])


def read_schedule_csv(path: Path) -> ImpulseSchedule:
    """Parse ``day,size[,rule]`` rows; raises with the bad line number."""
    entries: list[tuple[float, int]] = []
    rule = "manual"
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (lineno == 1 and row[0].strip().lower() == "day"):
                continue
            if len(row) < 2:
                raise ScheduleParseError(f"{path}:{lineno}: expected day,size")
            try:
                day = float(row[0])
                size_f = float(row[1])
            except ValueError as err:
                raise ScheduleParseError(f"{path}:{lineno}: {err}") from None
            if size_f < 0 or size_f != int(size_f):
                raise ScheduleParseError(
                    f"{path}:{lineno}: size must be a nonnegative integer"
                )
            if len(row) >= 3 and row[2].strip():
                rule = row[2].strip()
            entries.append((day, int(size_f)))
    try:
        return ImpulseSchedule(entries=tuple(entries), rule_tag=rule)
    except ValueError as err:
        raise ScheduleParseError(f"{path}: {err}") from None


def write_control_csv(path: Path, solution: OCPSolution) -> None:
    c = solution.control
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "u_star", "lambda1", "lambda2"])
        for i in range(c.times.shape[0]):
            writer.writerow(
                [
                    f"{c.times[i]:.12g}",
                    f"{c.values[i]:.12g}",
                    f"{solution.adjoints[i, 0]:.12g}",
                    f"{solution.adjoints[i, 1]:.12g}",
                ]
            )


def read_control_csv(path: Path) -> ContinuousControl:
    """Load a control grid; the cap is inferred as the max sampled rate."""
    times: list[float] = []
    values: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (lineno == 1 and row[0].strip().lower() == "t"):
                continue
            if len(row) < 2:
                raise ScheduleParseError(f"{path}:{lineno}: expected t,u_star,...")
            try:
                times.append(float(row[0]))
                values.append(float(row[1]))
            except ValueError as err:
                raise ScheduleParseError(f"{path}:{lineno}: {err}") from None
    if len(times) < 2:
        raise ScheduleParseError(f"{path}: control grid needs at least two samples")
    t = np.asarray(times)
    v = np.asarray(values)
    if np.any(np.diff(t) <= 0):
        raise ScheduleParseError(f"{path}: sample times must increase")
    return ContinuousControl(times=t, values=v, t_star=float(t[-1]), cap_l=float(v.max()))


def write_phase_csv(path: Path, rows: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "dx", "dy"])
        for x, y, dx, dy in rows:
            writer.writerow([f"{x:.10g}", f"{y:.10g}", f"{dx:.10g}", f"{dy:.10g}"])


def write_history_csv(path: Path, history) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generation", "best_fitness", "best_J", "feasible_count"])
        for rec in history:
            writer.writerow(
                [rec.generation, f"{rec.best_fitness:.12g}", rec.best_j, rec.feasible_count]
            )


def config_hash(config: dict[str, Any]) -> str:
    """Stable short hash of a configuration mapping."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _jsonable(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_summary(path: Path, summary: dict[str, Any]) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
