"""Comparison quantities computed from closed-loop traces.

All metrics are pure functions of an immutable trace.  The report bundles
the per-controller scalars; the comparison table adds pairwise reductions
of the proposed strategy against each baseline next to the configured
benchmark targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .plant import PlantParams
from .trace import Trace

# Benchmark reduction targets (percent) the harness prints next to the
# achieved numbers: section-4 drop, max gap, average overshoot, with the
# proposed hierarchical strategy measured against each baseline.
REFERENCE_TARGETS = {
    "drop_s4": {"single_mpc": 46.96, "rule_based": 51.33},
    "max_gap": {"single_mpc": 86.4, "rule_based": 78.7},
    "overshoot": {"single_mpc": 87.9, "rule_based": 95.17},
}


def section_drop(trace: Trace, section: int, window: tuple[float, float]) -> float:
    """Temperature drop of ``section`` over ``window``: start value minus minimum."""
    if section not in (1, 2, 3, 4):
        raise DomainError("section", "must be 1..4")
    t0, t1 = window
    if t1 <= t0:
        raise DomainError("window", "must have positive length")
    part = trace.slice_time(t0, t1)
    col = part.column(f"t_s{section}")
    return float(col[0] - col.min())


def max_section_gap(trace: Trace) -> tuple[np.ndarray, float]:
    """Per-record spread max_i T_si - min_i T_si and its maximum."""
    if len(trace) == 0:
        raise DomainError("trace", "empty")
    ts = trace.section_temps()
    series = ts.max(axis=1) - ts.min(axis=1)
    return series, float(series.max())


def average_cabin(trace: Trace, params: PlantParams) -> np.ndarray:
    """Mass-weighted mean section temperature per record."""
    ts = trace.section_temps()
    w = params.m_s / params.m_s.sum()
    return ts @ w


def overshoot(trace: Trace, t_set: float, from_t: float,
              params: PlantParams) -> float:
    """Peak of (average cabin temperature - t_set) from ``from_t`` on, >= 0."""
    part = trace.slice_time(from_t)
    avg = average_cabin(part, params)
    return float(max(avg.max() - t_set, 0.0))


def recovery_time(trace: Trace, t_set: float, delta: float, from_t: float,
                  dwell: float = 30.0) -> float | None:
    """Seconds after ``from_t`` until every section stays within ``delta``.

    The within-band condition must hold for ``dwell`` seconds before the
    entry time counts; ``None`` means the trace never recovers.
    """
    if delta <= 0.0:
        raise DomainError("delta", "must be > 0")
    part = trace.slice_time(from_t)
    ts = part.section_temps()
    within = np.all(np.abs(ts - t_set) <= delta, axis=1)
    t = part.t
    t_end = t[-1]
    start = None
    for i, ok in enumerate(within):
        if ok and start is None:
            start = i
        elif not ok:
            start = None
            continue
        if start is not None and t[i] - t[start] >= dwell:
            return float(t[start] - from_t)
    # a band entry that persists to the end of the trace but for less than
    # the dwell does not count
    if start is not None and t_end - t[start] >= dwell:
        return float(t[start] - from_t)
    return None


def reduction_pct(baseline_value: float, proposed_value: float) -> float:
    """Percent reduction of ``proposed_value`` against ``baseline_value``."""
    if baseline_value <= 0.0:
        raise DomainError("baseline_value", "must be > 0")
    return 100.0 * (baseline_value - proposed_value) / baseline_value


def energy_consumed(trace: Trace, params: PlantParams) -> float:
    """Trapezoidal integral of the electric heating draw, J.

    Electric draw is the heat-pump input power q_hp/cop plus the pump power
    k_pump * (mdot_b + mdot_c).
    """
    if len(trace) == 0:
        raise DomainError("trace", "empty")
    p_elec = (trace.column("q_hp") / params.cop
              + params.k_pump * (trace.column("mdot_b") + trace.column("mdot_c")))
    return float(np.trapezoid(p_elec, trace.t))


@dataclass
class MetricsReport:
    """Scalar quantities of one controller run."""

    controller: str
    drop_s1: float
    drop_s2: float
    drop_s3: float
    drop_s4: float
    max_gap: float
    overshoot: float
    recovery_s: float | None
    energy_j: float
    final_soc: float
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        # the controller name stays out of the payload: runs of equivalent
        # controllers must produce byte-identical report files
        return {
            "section_drop_degC": {"s1": self.drop_s1, "s2": self.drop_s2,
                                  "s3": self.drop_s3, "s4": self.drop_s4},
            "max_section_gap_degC": self.max_gap,
            "overshoot_degC": self.overshoot,
            "recovery_s": self.recovery_s,
            "energy_consumed_J": self.energy_j,
            "final_soc": self.final_soc,
            **self.extras,
        }


def build_report(trace: Trace, params: PlantParams, controller: str,
                 t_set: float, door_open_t: float | None,
                 drop_window: float = 300.0, delta: float = 1.0,
                 dwell: float = 30.0) -> MetricsReport:
    """Evaluate all benchmark metrics on one trace.

    ``door_open_t`` anchors the drop window, the overshoot scan and the
    recovery clock; a door-free run (or a door past the end of the trace)
    anchors them at t = 0.
    """
    t_end = float(trace.t[-1])
    from_t = door_open_t if door_open_t is not None else 0.0
    if not (0.0 <= from_t < t_end):
        from_t = 0.0
    window = (from_t, min(from_t + drop_window, t_end))
    drops = [section_drop(trace, s, window) for s in (1, 2, 3, 4)]
    _, gap = max_section_gap(trace.slice_time(from_t))
    return MetricsReport(
        controller=controller,
        drop_s1=drops[0], drop_s2=drops[1], drop_s3=drops[2], drop_s4=drops[3],
        max_gap=gap,
        overshoot=overshoot(trace, t_set, from_t, params),
        recovery_s=recovery_time(trace, t_set, delta, from_t, dwell),
        energy_j=energy_consumed(trace, params),
        final_soc=float(trace.column("soc")[-1]),
    )


def comparison_table(reports: dict[str, MetricsReport],
                     proposed: str = "hierarchical") -> str:
    """Fixed-column text table of metrics plus pairwise reductions."""
    names = sorted(reports)
    rows: list[tuple[str, ...]] = [("metric", *names)]

    def fmt(v):
        if v is None:
            return "n/a"
        return f"{v:.4f}"

    rows.append(("drop_s4 [degC]", *(fmt(reports[n].drop_s4) for n in names)))
    rows.append(("max_gap [degC]", *(fmt(reports[n].max_gap) for n in names)))
    rows.append(("overshoot [degC]", *(fmt(reports[n].overshoot) for n in names)))
    rows.append(("recovery [s]", *(fmt(reports[n].recovery_s) for n in names)))
    rows.append(("energy [kJ]", *(fmt(reports[n].energy_j / 1e3) for n in names)))
    lines = []
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))

    if proposed in reports:
        lines.append("")
        lines.append(f"reductions of {proposed} vs baselines "
                     f"(achieved | target):")
        for metric, attr in (("drop_s4", "drop_s4"), ("max_gap", "max_gap"),
                             ("overshoot", "overshoot")):
            for base in names:
                if base == proposed:
                    continue
                base_v = getattr(reports[base], attr)
                prop_v = getattr(reports[proposed], attr)
                if base_v is None or base_v <= 0.0:
                    achieved = "n/a"
                else:
                    achieved = f"{reduction_pct(base_v, prop_v):7.2f}%"
                target = REFERENCE_TARGETS.get(metric, {}).get(base)
                target_s = f"{target:.2f}%" if target is not None else "-"
                lines.append(f"  {metric:10s} vs {base:12s} {achieved} | {target_s}")
    return "\n".join(lines) + "\n"
