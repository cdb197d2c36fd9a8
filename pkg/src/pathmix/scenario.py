"""Scenario configuration files and run persistence.

Scenarios are JSON; run artifacts are a JSON manifest plus CSV tables for the
sampled tensors and traces.  All floats are serialized with 17 significant
digits so the text round-trips 64-bit values exactly; the only
non-deterministic output is the ``created_at`` timestamp inside the manifest.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import ControlConfig
from .errors import ScenarioError
from .metrics import EvalReport
from .mixtures import ConditionModel, make_condition_model
from .optim import OptimizerConfig
from .sampling import RunResult, SegmentLayout
from .schedules import (NoiseSchedule, TimestepPlan, build_cosine_schedule,
                        select_ddim_timesteps)

DEFAULTS = {
    "layout": {"K": 4, "S": 16, "C": 4, "root_channel": 0},
    "domains": {"c0": {"kind": "toy", "cycles": 2.0, "root_drift": 0.5},
                "c1": {"kind": "toy", "cycles": 6.0, "root_drift": 1.5},
                "p0": 0.5},
    "schedule": {"T": 1000, "N": 50},
    "optimizer": {"J": 20, "lr": 0.01, "warm_start": True},
    "control": {"w_T": 1.0, "lambda_mode": "posterior",
                "sigmoid_sharpness": 10.0},
    "eval": {"n_clips": 200, "n_pairs": 2000},
    "seed": 0,
}

METHOD_ORDER = ("ground_truth", "linear", "sigmoid", "sine", "mdpa")


@dataclass(frozen=True)
class Scenario:
    layout: SegmentLayout
    domains: dict
    total_steps: int = 1000    # T
    ddim_steps: int = 50       # N
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    eval_n_clips: int = 200
    eval_n_pairs: int = 2000
    seed: int = 0

    def build_schedule(self) -> NoiseSchedule:
        return build_cosine_schedule(self.total_steps)

    def build_plan(self, schedule: NoiseSchedule) -> TimestepPlan:
        return select_ddim_timesteps(schedule, self.ddim_steps)

    def build_model(self) -> ConditionModel:
        spec = dict(self.domains)
        spec["S"], spec["C"] = self.layout.S, self.layout.C
        return make_condition_model(spec)

    def to_dict(self) -> dict:
        return {
            "layout": {"K": self.layout.K, "S": self.layout.S,
                       "C": self.layout.C,
                       "root_channel": self.layout.root_channel},
            "domains": self.domains,
            "schedule": {"T": self.total_steps, "N": self.ddim_steps},
            "optimizer": {"J": self.optimizer.steps, "lr": self.optimizer.lr,
                          "warm_start": self.optimizer.warm_start},
            "control": {"w_T": self.control.terminal_weight,
                        "lambda_mode": self.control.lambda_mode,
                        "sigmoid_sharpness": self.control.sigmoid_sharpness},
            "eval": {"n_clips": self.eval_n_clips,
                     "n_pairs": self.eval_n_pairs},
            "seed": self.seed,
        }

    @property
    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def _merge_section(name: str, raw: dict, defaults: dict,
                   free_keys: tuple = ()) -> dict:
    unknown = set(raw) - set(defaults) - set(free_keys)
    if unknown:
        raise ScenarioError(
            f"unknown key(s) in {name!r}: {', '.join(sorted(unknown))}")
    merged = dict(defaults)
    merged.update(raw)
    return merged


def scenario_from_dict(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    top = _merge_section("scenario", raw, DEFAULTS)
    lay = _merge_section("layout", top["layout"], DEFAULTS["layout"])
    if lay["K"] < 2:
        raise ScenarioError("layout.K must be >= 2")
    if lay["S"] % 2 != 0:
        raise ScenarioError("layout.S must be even")
    dom = _merge_section("domains", top["domains"], DEFAULTS["domains"])
    sch = _merge_section("schedule", top["schedule"], DEFAULTS["schedule"])
    opt = _merge_section("optimizer", top["optimizer"], DEFAULTS["optimizer"])
    ctl = _merge_section("control", top["control"], DEFAULTS["control"])
    ev = _merge_section("eval", top["eval"], DEFAULTS["eval"])
    try:
        return Scenario(
            layout=SegmentLayout(int(lay["K"]), int(lay["S"]), int(lay["C"]),
                                 int(lay["root_channel"])),
            domains=dom,
            total_steps=int(sch["T"]),
            ddim_steps=int(sch["N"]),
            optimizer=OptimizerConfig(steps=int(opt["J"]), lr=float(opt["lr"]),
                                      warm_start=bool(opt["warm_start"])),
            control=ControlConfig(terminal_weight=float(ctl["w_T"]),
                                  lambda_mode=str(ctl["lambda_mode"]),
                                  sigmoid_sharpness=float(
                                      ctl["sigmoid_sharpness"])),
            eval_n_clips=int(ev["n_clips"]),
            eval_n_pairs=int(ev["n_pairs"]),
            seed=int(top["seed"]),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"{path}: parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from exc
    return scenario_from_dict(raw)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header: list[str], rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(c) if isinstance(c, (int, np.integer))
                              else _fmt(c) for c in row))
    path.write_text("\n".join(lines) + "\n")


def write_run(result: RunResult, report: EvalReport | None, out_dir) -> Path:
    """Persist one run: manifest.json plus CSV tables for the tensors."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    K, S, C = result.final_segments.shape
    chan_cols = [f"c{j}" for j in range(C)]
    _write_csv(out / "segments.csv", ["segment", "frame"] + chan_cols,
               ((k, s, *result.final_segments[k, s])
                for k in range(K) for s in range(S)))
    _write_csv(out / "long_sequence.csv", ["frame"] + chan_cols,
               ((i, *row) for i, row in enumerate(result.long_sequence)))
    N = len(result.omega_grid)
    _write_csv(out / "omega.csv",
               ["step"] + [f"omega_{k}" for k in range(K)],
               ((n, *result.omega_grid[n]) for n in range(N)))
    _write_csv(out / "energy.csv", ["step", "transient", "terminal", "total"],
               ((n, e.transient, e.terminal, e.total)
                for n, e in enumerate(result.energy_trace)))

    manifest = {
        "seed": result.seed,
        "fingerprint": result.fingerprint,
        "wall_time": result.wall_time,
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "metrics": report.as_dict() if report is not None else None,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path


def export_comparison_table(reports: dict, path) -> Path:
    """CSV comparing metric reports across methods, one row per method."""
    if not reports:
        raise ScenarioError("no reports to export")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    order = [m for m in METHOD_ORDER if m in reports]
    order += sorted(set(reports) - set(order))
    header = ["method", "fid_kinetic", "fid_geometric", "div_kinetic",
              "div_geometric", "accel_mean", "accel_var", "jerk_mean",
              "jerk_var", "n_gen", "n_gt"]
    lines = [",".join(header)]
    for method in order:
        r = reports[method]
        lines.append(",".join([method] + [
            _fmt(v) for v in (r.fid_kinetic, r.fid_geometric, r.div_kinetic,
                              r.div_geometric, r.accel_mean, r.accel_var,
                              r.jerk_mean, r.jerk_var)]
            + [str(r.n_gen), str(r.n_gt)]))
    path.write_text("\n".join(lines) + "\n")
    return path
