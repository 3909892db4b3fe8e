#!/usr/bin/env python3
"""Run the benchmark drive with all three controllers and render charts.

Equivalent to:
    evtherm run --scenario configs/reference.yaml \
        --controllers hierarchical,single_mpc,rule_based \
        --out out/reference --charts
"""

import argparse
import sys
from pathlib import Path

from evtherm.cli import main as cli_main

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default=str(ROOT / "configs" / "reference.yaml"))
    parser.add_argument("--out", default=str(ROOT / "out" / "reference"))
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE")
    args = parser.parse_args()
    argv = ["run", "--scenario", args.scenario, "--out", args.out,
            "--controllers", "hierarchical,single_mpc,rule_based", "--charts"]
    for item in args.overrides:
        argv += ["--set", item]
    status = cli_main(argv)
    if status == 0:
        print((Path(args.out) / "comparison.txt").read_text())
        print(f"outputs in {args.out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
