"""Run orchestration: scenario in, export files and a report out."""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import export
from .errors import ResolutionWarning
from .scenario import Scenario, build_front, build_grid, build_metric, build_params
from .spacetime import spacetime_for
from .wavefront import (
    CAUSE_EXIT,
    CAUSE_HORIZON,
    CAUSE_NO_SOLUTION,
    STATUS_OK,
    CutRecord,
    arrival_field,
    detect_cuts,
    propagate,
)

log = logging.getLogger(__name__)

CUT_CAUSES = ("intersection", "focal", "both")


@dataclass
class RunResult:
    report: dict
    files: list
    wall_time: float

    @property
    def exit_code(self):
        return 0 if self.report["ok"] else 1


def horizon_cuts(wm):
    """Cut records when cut detection is switched off: only exits are recorded."""
    out = []
    for i in range(wm.n_seeds):
        if wm.status[i] == CAUSE_NO_SOLUTION:
            out.append(CutRecord(i, float(wm.t[0]), CAUSE_NO_SOLUTION))
        elif wm.status[i] != STATUS_OK:
            out.append(CutRecord(i, float(wm.exit_time[i]), CAUSE_EXIT))
        else:
            out.append(CutRecord(i, float("inf"), CAUSE_HORIZON))
    return out


def _drift_stats(wm):
    d = wm.drift
    if d is None or not np.any(np.isfinite(d)):
        return 0.0, 0.0
    dmax = float(np.nanmax(d))
    span = wm.t[-1] - wm.t[0]
    return dmax, dmax / span if span > 0 else 0.0


def build_report(sc: Scenario, wm, cuts, field_=None, resolution_warnings=0):
    dt = sc.run["dt"]
    drift_max, drift_rate = _drift_stats(wm)
    t_cut = np.array([c.t_cut for c in cuts if c.cause in CUT_CAUSES])
    min_cut = float(t_cut.min()) if t_cut.size else None
    counts = {}
    for c in cuts:
        counts[c.cause] = counts.get(c.cause, 0) + 1
    failures = [{"seed": int(i), "reason": str(msg)} for i, msg in sorted(wm.failures.items())]
    rejected = int(np.sum(wm.status == "rejected"))
    monitors = {
        "null_drift": drift_rate > sc.run["drift_tolerance"],
        "early_cut": min_cut is not None and min_cut - wm.t[0] < dt,
        "step_rejected": rejected > 0,
    }
    report = {
        "seeds": wm.n_seeds,
        "dt": dt,
        "t_max": sc.run["t_max"],
        "spacetime": wm.metric.kind,
        "drift_max": drift_max,
        "drift_rate": drift_rate,
        "min_cut": min_cut,
        "cut_counts": dict(sorted(counts.items())),
        "seed_failures": failures,
        "exits": int(np.sum(wm.status == "exit")),
        "rejected": rejected,
        "resolution_warnings": resolution_warnings,
        "unreachable_cells": None if field_ is None else int(np.sum(~np.isfinite(field_))),
        "monitors": monitors,
        "ok": not any(monitors.values()),
    }
    return report


def run_scenario(sc: Scenario, out_dir=None, threads=None) -> RunResult:
    """Propagate the scenario's front and write every requested export.

    The returned report's ``ok`` flag is false iff an invariant monitor
    tripped: null drift above ``drift_tolerance`` per unit time, a cut within
    the first step, or a rejected integration step.
    """
    start = time.perf_counter()
    metric = build_metric(sc)
    front = build_front(sc)
    params = build_params(sc)
    st = spacetime_for(metric, sc.metric.get("spacetime", "auto"))
    side = sc.front.get("side", "outward")
    wm = propagate(st, front, params, side, threads=threads)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ResolutionWarning)
        cuts = detect_cuts(wm) if sc.run["cuts"] else horizon_cuts(wm)
    n_res = sum(issubclass(w.category, ResolutionWarning) for w in caught)
    for w in caught:
        log.warning("%s", w.message)
    grid = build_grid(sc)
    field_ = arrival_field(wm, cuts, grid) if grid is not None else None
    report = build_report(sc, wm, cuts, field_, n_res)

    out = Path(out_dir if out_dir is not None else sc.resolve(sc.output["directory"]))
    out.mkdir(parents=True, exist_ok=True)
    files = []
    fmts = sc.output["formats"]
    times = sc.run["slice_times"]
    if "csv" in fmts:
        export.write_csv(out / "fronts.csv", ["t", "seed", "x", "y", "alive"], export.front_rows(wm, cuts, times))
        export.write_csv(out / "trajectories.csv", ["seed", "t", "x", "y"], export.trajectory_rows(wm, sc.run["trajectory_stride"]))
        files += ["fronts.csv", "trajectories.csv"]
        if field_ is not None:
            xs, ys = grid.centres()
            rows = [[int(i), int(j), xs[i], ys[j], field_[i, j]] for j in range(grid.ny) for i in range(grid.nx)]
            export.write_csv(out / "arrival.csv", ["i", "j", "x", "y", "T"], rows)
            files.append("arrival.csv")
    if "json" in fmts:
        export.write_json(out / "cuts.json", export.cut_records(cuts))
        export.write_json(out / "fronts.json", export.fronts_document(wm, cuts, times))
        files += ["cuts.json", "fronts.json"]
    export.write_json(out / "report.json", report)
    files.append("report.json")
    wall = time.perf_counter() - start
    export.write_json(out / "timing.json", {"wall_time": wall})
    files.append("timing.json")
    return RunResult(report, [str(out / f) for f in files], wall)
