"""Command-line entry point: run comparisons, recompute metrics, check configs.

Exit codes: 0 success, 2 configuration errors, 3 simulation divergence or
battery depletion, 4 optimizer infeasibility.  Data outputs (CSV traces,
JSON reports, the comparison table, SVG charts) are pure functions of the
config; wall-clock timestamps go only to run.log.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import metrics as metrics_mod
from .config import RunConfig, load_config
from .controllers import CONTROLLER_NAMES, make_controller
from .errors import (
    ConfigError,
    DepletionError,
    DivergenceError,
    DomainError,
    InfeasibleError,
)
from .simulate import simulate
from .trace import Trace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_INFEASIBLE = 4


@dataclass
class RunManifest:
    scenario_path: str
    controllers: tuple[str, ...]
    out_dir: str
    overrides: list[str] = field(default_factory=list)
    charts: bool = False

    def __post_init__(self):
        if not self.controllers:
            raise ConfigError("at least one controller is required")
        for name in self.controllers:
            if name not in CONTROLLER_NAMES:
                raise ConfigError(f"unknown controller {name!r}; "
                                  f"choose from {', '.join(CONTROLLER_NAMES)}")


def _door_open_t(cfg: RunConfig) -> float | None:
    events = cfg.scenario.door_events
    return min(ev.t_open for ev in events) if events else None


def run(manifest: RunManifest) -> int:
    """Simulate every requested controller and write traces, reports, table."""
    cfg = load_config(manifest.scenario_path, manifest.overrides)
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_lines = [f"config: {manifest.scenario_path}",
                 f"controllers: {','.join(manifest.controllers)}"]

    traces: dict[str, Trace] = {}
    reports: dict[str, metrics_mod.MetricsReport] = {}
    door_t = _door_open_t(cfg)
    for name in sorted(set(manifest.controllers)):
        controller = make_controller(name, cfg.plant, cfg.law, cfg.limits,
                                     cfg.upper, cfg.lower, cfg.rule,
                                     cfg.air_total)
        started = time.time()
        trace = simulate(cfg.scenario, cfg.plant, cfg.law, cfg.limits,
                         controller, cfg.sim)
        log_lines.append(f"{name}: simulated {cfg.scenario.duration:.0f} s "
                         f"in {time.time() - started:.2f} s wall")
        traces[name] = trace
        trace.write_csv(out / f"trace_{name}.csv")
        report = metrics_mod.build_report(trace, cfg.plant, name,
                                          cfg.scenario.t_set_cab, door_t)
        reports[name] = report
        (out / f"report_{name}.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")

    (out / "comparison.txt").write_text(metrics_mod.comparison_table(reports))
    if manifest.charts:
        from .charts import render_charts

        render_charts(traces, out / "charts", cfg.plant, cfg.scenario.t_set_cab)
    (out / "run.log").write_text("\n".join(log_lines) + "\n")
    return EXIT_OK


def metrics_command(trace_path: str, scenario_path: str,
                    overrides: list[str]) -> int:
    cfg = load_config(scenario_path, overrides)
    trace = Trace.read_csv(trace_path)
    report = metrics_mod.build_report(trace, cfg.plant, Path(trace_path).stem,
                                      cfg.scenario.t_set_cab, _door_open_t(cfg))
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def validate_config(path: str) -> int:
    load_config(path)
    print(f"{path}: OK")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evtherm",
        description="EV heating benchmark: simulate controllers and compare")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one or more controllers")
    p_run.add_argument("--scenario", required=True, help="config YAML path")
    p_run.add_argument("--controllers", required=True,
                       help="comma-separated: hierarchical,single_mpc,rule_based")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--charts", action="store_true", help="render SVG charts")
    p_run.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config entry")

    p_met = sub.add_parser("metrics", help="recompute metrics from a trace CSV")
    p_met.add_argument("--trace", required=True)
    p_met.add_argument("--scenario", required=True)
    p_met.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE")

    p_val = sub.add_parser("validate-config", help="parse and check a config")
    p_val.add_argument("path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            manifest = RunManifest(
                scenario_path=args.scenario,
                controllers=tuple(s.strip() for s in args.controllers.split(",")
                                  if s.strip()),
                out_dir=args.out, overrides=args.overrides, charts=args.charts)
            return run(manifest)
        if args.command == "metrics":
            return metrics_command(args.trace, args.scenario, args.overrides)
        if args.command == "validate-config":
            return validate_config(args.path)
        raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, DepletionError) as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except InfeasibleError as exc:
        print(f"optimizer infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DomainError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
