#!/usr/bin/env python3
"""Sweep the coolant layer's cabin/battery weight on a shortened drive.

Prints, per alpha, how fast the cabin and the battery reach their setpoints
and the electric energy spent, to show the trade the weight controls.
"""

import argparse

import numpy as np

from evtherm.config import parse_config, reference_config_dict
from evtherm.controllers import make_controller
from evtherm.metrics import average_cabin, energy_consumed
from evtherm.simulate import simulate


def time_to(t, series, level):
    hit = np.nonzero(series >= level)[0]
    return float(t[hit[0]]) if hit.size else float("nan")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--alphas", default="0.3,0.5,0.6,0.8")
    parser.add_argument("--duration", type=float, default=900.0)
    args = parser.parse_args()

    doc = reference_config_dict()
    doc["scenario"]["duration"] = args.duration
    doc["scenario"]["door_events"] = []
    doc["scenario"]["passenger_events"] = []
    print(f"{'alpha':>6} {'cabin@23 [s]':>13} {'battery@20 [s]':>15} "
          f"{'energy [kJ]':>12}")
    for alpha in (float(a) for a in args.alphas.split(",")):
        doc.setdefault("controllers", {})["upper"] = {"alpha": alpha}
        cfg = parse_config(doc)
        ctrl = make_controller("single_mpc", cfg.plant, cfg.law, cfg.limits,
                               cfg.upper, cfg.lower, cfg.rule, cfg.air_total)
        tr = simulate(cfg.scenario, cfg.plant, cfg.law, cfg.limits, ctrl,
                      cfg.sim)
        t_cab = time_to(tr.t, average_cabin(tr, cfg.plant),
                        cfg.scenario.t_set_cab)
        t_bat = time_to(tr.t, tr.column("t_bat"), cfg.scenario.t_set_bat)
        print(f"{alpha:6.2f} {t_cab:13.0f} {t_bat:15.0f} "
              f"{energy_consumed(tr, cfg.plant) / 1e3:12.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
