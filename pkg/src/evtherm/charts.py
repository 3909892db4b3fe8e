"""Static SVG charts comparing controller traces.

Output is deterministic: a fixed hash salt for SVG element ids and no
embedded creation date, so repeated runs produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

import numpy as np  # noqa: E402

from .errors import DomainError  # noqa: E402
from .metrics import average_cabin, max_section_gap  # noqa: E402
from .plant import PlantParams  # noqa: E402
from .trace import Trace  # noqa: E402

plt.rcParams["svg.hashsalt"] = "evtherm"
_SAVE_KW = dict(format="svg", metadata={"Date": None})


def _check_grids(traces: dict[str, Trace]) -> None:
    if not traces:
        raise DomainError("traces", "need at least one trace")
    names = sorted(traces)
    t0 = traces[names[0]].t
    for name in names[1:]:
        if not np.array_equal(traces[name].t, t0):
            raise DomainError("traces", f"{name} is on a different time grid")


def render_charts(traces: dict[str, Trace], out_dir: str | Path,
                  params: PlantParams, t_set: float) -> list[Path]:
    """Write the section, gap and average-temperature charts; returns paths."""
    _check_grids(traces)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = sorted(traces)
    paths = []

    fig, axes = plt.subplots(2, 2, figsize=(10, 7), sharex=True, sharey=True)
    for sec, ax in enumerate(axes.flat, start=1):
        for name in names:
            tr = traces[name]
            ax.plot(tr.t, tr.column(f"t_s{sec}"), label=name, linewidth=1.0)
        ax.axhline(t_set, color="grey", linestyle=":", linewidth=0.8)
        ax.set_title(f"section {sec}")
        ax.set_ylabel("T [degC]")
    axes[1, 0].set_xlabel("t [s]")
    axes[1, 1].set_xlabel("t [s]")
    axes[0, 0].legend(loc="lower right", fontsize=8)
    fig.suptitle("cabin section temperatures")
    fig.tight_layout()
    path = out_dir / "sections.svg"
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for name in names:
        series, _ = max_section_gap(traces[name])
        ax.plot(traces[name].t, series, label=name, linewidth=1.0)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("max - min section T [degC]")
    ax.set_title("inter-section temperature gap")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "gap.svg"
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for name in names:
        ax.plot(traces[name].t, average_cabin(traces[name], params),
                label=name, linewidth=1.0)
    ax.axhline(t_set, color="grey", linestyle=":", linewidth=0.8)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("average cabin T [degC]")
    ax.set_title("average cabin temperature")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "average.svg"
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    paths.append(path)
    return paths
