"""Command-line interface: generate, evaluate, compare, sweep, check.

Every subcommand is deterministic given an explicit seed and writes only
inside its --out directory.  Exit codes: 0 success, 1 runtime failure or
failing checks, 2 usage / configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .checks import run_check
from .errors import InvalidConfigError, NumericError, ScenarioError
from .metrics import evaluate
from .mixtures import Condition, sample_clips
from .sampling import BASELINE_KINDS, baseline_sample, optimized_sample
from .scenario import (DEFAULTS, METHOD_ORDER, Scenario, _fmt,
                       export_comparison_table, load_scenario,
                       scenario_from_dict, write_run)
from .segments import slice_windows

METHODS = ("mdpa",) + BASELINE_KINDS


def _load(args) -> Scenario:
    if args.scenario is None:
        scenario = scenario_from_dict({})
    else:
        scenario = load_scenario(args.scenario)
    if getattr(args, "seed", None) is not None:
        raw = scenario.to_dict()
        raw["seed"] = args.seed
        scenario = scenario_from_dict(raw)
    return scenario


def _run_method(scenario: Scenario, method: str, seed: int):
    if method == "mdpa":
        return optimized_sample(scenario, seed)
    return baseline_sample(scenario, method, seed)


def _sub_seed(base: int, method: str, run_index: int) -> int:
    order = METHOD_ORDER.index(method)
    ss = np.random.SeedSequence(entropy=base, spawn_key=(order, run_index))
    return int(ss.generate_state(1)[0])


def _gt_clips(scenario: Scenario, base_seed: int) -> np.ndarray:
    """Class-balanced ground truth: half the clips from each condition."""
    model = scenario.build_model()
    half = scenario.eval_n_clips // 2
    c0 = sample_clips(model, Condition.SOURCE, half, base_seed + 1)
    c1 = sample_clips(model, Condition.TARGET, scenario.eval_n_clips - half,
                      base_seed + 2)
    return np.concatenate([np.asarray(c0), np.asarray(c1)])


def _method_clips(scenario: Scenario, method: str, n_runs: int) -> np.ndarray:
    S = scenario.layout.S
    clips = []
    for r in range(n_runs):
        result = _run_method(scenario, method,
                             _sub_seed(scenario.seed, method, r))
        clips.extend(slice_windows(result.long_sequence, S, S // 2))
    return np.asarray(clips[:scenario.eval_n_clips])


def _default_runs(scenario: Scenario) -> int:
    # one run yields K sliding windows of the assembled sequence
    return -(-scenario.eval_n_clips // scenario.layout.K)


def cmd_generate(args) -> int:
    scenario = _load(args)
    result = _run_method(scenario, args.method, scenario.seed)
    write_run(result, None, args.out)
    print(f"wrote run artifacts to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    scenario = _load(args)
    n_runs = args.runs or _default_runs(scenario)
    gen = _method_clips(scenario, args.method, n_runs)
    gt = _gt_clips(scenario, scenario.seed)
    report = evaluate(gen, gt, scenario.eval_n_pairs, scenario.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(
        json.dumps(report.as_dict(), indent=2) + "\n")
    print(f"{args.method}: fid_kinetic {report.fid_kinetic:.4f}, "
          f"fid_geometric {report.fid_geometric:.4f}")
    return 0


def cmd_compare(args) -> int:
    scenario = _load(args)
    n_runs = args.runs or _default_runs(scenario)
    gt = _gt_clips(scenario, scenario.seed)
    reports = {"ground_truth": evaluate(gt, gt, scenario.eval_n_pairs,
                                        scenario.seed)}
    for method in METHODS:
        gen = _method_clips(scenario, method, n_runs)
        reports[method] = evaluate(gen, gt, scenario.eval_n_pairs,
                                   scenario.seed)
    out = Path(args.out)
    path = export_comparison_table(reports, out / "comparison.csv")
    print(f"wrote {path}")
    return 0


SWEEP_KEYS = {"w_T": ("control", "w_T"), "J": ("optimizer", "J"),
              "K": ("layout", "K"), "lr": ("optimizer", "lr")}


def _parse_sweep(spec: str):
    if "=" not in spec:
        raise ScenarioError("sweep must look like KEY=V1,V2,...")
    key, _, values = spec.partition("=")
    if key not in SWEEP_KEYS:
        raise ScenarioError(
            f"sweep key must be one of {sorted(SWEEP_KEYS)}, got {key!r}")
    parsed = []
    for token in values.split(","):
        parsed.append(int(token) if key in ("J", "K") else float(token))
    if not parsed:
        raise ScenarioError("sweep needs at least one value")
    return key, parsed


def cmd_sweep(args) -> int:
    scenario = _load(args)
    key, values = _parse_sweep(args.sweep)
    section, field = SWEEP_KEYS[key]
    out = Path(args.out)
    rows = []
    for value in values:
        raw = scenario.to_dict()
        raw[section][field] = value
        variant = scenario_from_dict(raw)
        result = optimized_sample(variant, variant.seed)
        run_dir = out / f"{key}_{value:g}"
        write_run(result, None, run_dir)
        max_energy = max(e.total for e in result.energy_trace)
        final_energy = result.energy_trace[-1].total
        rows.append((value, max_energy, final_energy, result.wall_time))
    lines = [f"{key},max_energy,final_energy,wall_time"]
    lines += [",".join(_fmt(c) for c in row) for row in rows]
    (out / "summary.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out / 'summary.csv'} ({len(values)} runs)")
    return 0


def cmd_check(args) -> int:
    return run_check()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathmix",
        description="Segmented diffusion sampling with optimized guidance "
                    "mixing: generation, evaluation, and verification.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, method=False, runs=False, sweep=False, out=True):
        p.add_argument("--scenario", type=Path, default=None,
                       help="scenario JSON (defaults to the built-in toy)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
        if method:
            p.add_argument("--method", choices=METHODS, default="mdpa")
        if runs:
            p.add_argument("--runs", type=int, default=None,
                           help="number of sampling runs to pool")
        if sweep:
            p.add_argument("--sweep", required=True, metavar="KEY=V1,V2,...",
                           help=f"scalar to vary, one of {sorted(SWEEP_KEYS)}")
        if out:
            p.add_argument("--out", type=Path, required=True,
                           help="output directory")

    common(sub.add_parser("generate", help="run one sampler and write "
                          "run artifacts"), method=True)
    common(sub.add_parser("evaluate", help="pool runs for one method and "
                          "write metrics"), method=True, runs=True)
    common(sub.add_parser("compare", help="evaluate all methods against "
                          "ground truth"), runs=True)
    common(sub.add_parser("sweep", help="vary one scalar over a list of "
                          "values"), sweep=True)
    sub.add_parser("check", help="run the verification checks")

    parser.set_defaults(handler=None)
    for name, fn in (("generate", cmd_generate), ("evaluate", cmd_evaluate),
                     ("compare", cmd_compare), ("sweep", cmd_sweep),
                     ("check", cmd_check)):
        sub.choices[name].set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ScenarioError, InvalidConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
