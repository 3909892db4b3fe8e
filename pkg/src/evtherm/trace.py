"""Columnar simulation traces and their exact CSV serialization.

Floats are written with ``repr`` (shortest round-trip decimal), so
``read_csv(write_csv(trace))`` reproduces every numeric field bit for bit
and repeated runs emit byte-identical files.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError
from .plant import ControlInput, PlantState

COLUMNS = (
    "t",
    "t_c1", "t_c2", "t_c3", "t_c4", "t_ha", "t_cab", "t_cb",
    "t_s1", "t_s2", "t_s3", "t_s4", "t_bat", "soc",
    "mdot_b", "mdot_c", "mdot_a1", "mdot_a2", "mdot_a3", "mdot_a4",
    "door_signal", "lower_active", "q_hp",
)
_FLAG_COLUMNS = ("door_signal", "lower_active")


@dataclass(frozen=True)
class TraceRecord:
    t: float
    state: PlantState
    u: ControlInput
    door_signal: bool
    lower_active: bool
    q_hp: float


class Trace:
    """Fixed-column record of one closed-loop run."""

    def __init__(self, data: dict[str, np.ndarray]):
        missing = [c for c in COLUMNS if c not in data]
        if missing:
            raise DomainError("trace", f"missing columns {missing}")
        n = len(data["t"])
        for c in COLUMNS:
            arr = np.asarray(data[c], dtype=float)
            if arr.shape != (n,):
                raise DomainError("trace", f"column {c} has wrong length")
            data[c] = arr
        t = data["t"]
        if n > 1 and not np.all(np.diff(t) > 0.0):
            raise DomainError("t", "must be strictly increasing")
        self.data = data

    def __len__(self) -> int:
        return len(self.data["t"])

    @property
    def t(self) -> np.ndarray:
        return self.data["t"]

    def column(self, name: str) -> np.ndarray:
        return self.data[name]

    def section_temps(self) -> np.ndarray:
        """Section temperatures, shape (n_records, 4)."""
        return np.column_stack([self.data[f"t_s{i}"] for i in range(1, 5)])

    def slice_time(self, t0: float, t1: float | None = None) -> "Trace":
        mask = self.t >= t0
        if t1 is not None:
            mask &= self.t <= t1
        if not np.any(mask):
            raise DomainError("window", f"no records in [{t0}, {t1}]")
        return Trace({c: self.data[c][mask].copy() for c in COLUMNS})

    def record(self, i: int) -> TraceRecord:
        d = self.data
        state = PlantState(
            t_c1=d["t_c1"][i], t_c2=d["t_c2"][i], t_c3=d["t_c3"][i],
            t_c4=d["t_c4"][i], t_ha=d["t_ha"][i], t_cab=d["t_cab"][i],
            t_cb=d["t_cb"][i],
            t_s=np.array([d[f"t_s{j}"][i] for j in range(1, 5)]),
            t_bat=d["t_bat"][i], soc=d["soc"][i])
        u = ControlInput(mdot_b=d["mdot_b"][i], mdot_c=d["mdot_c"][i],
                         mdot_a=np.array([d[f"mdot_a{j}"][i] for j in range(1, 5)]))
        return TraceRecord(t=float(d["t"][i]), state=state, u=u,
                           door_signal=bool(d["door_signal"][i]),
                           lower_active=bool(d["lower_active"][i]),
                           q_hp=float(d["q_hp"][i]))

    def records(self):
        for i in range(len(self)):
            yield self.record(i)

    @classmethod
    def from_rows(cls, rows: list[dict]) -> "Trace":
        return cls({c: np.array([row[c] for row in rows], dtype=float)
                    for c in COLUMNS})

    # -- serialization -------------------------------------------------------

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        n = len(self)
        cols = [self.data[c] for c in COLUMNS]
        flags = {COLUMNS.index(c) for c in _FLAG_COLUMNS}
        for i in range(n):
            writer.writerow([str(int(col[i])) if j in flags else repr(float(col[i]))
                             for j, col in enumerate(cols)])
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv_text())

    @classmethod
    def read_csv(cls, path: str | Path) -> "Trace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != COLUMNS:
                raise DomainError("trace csv", f"unexpected header {header!r}")
            raw = list(reader)
        data = {c: np.array([float(row[j]) for row in raw])
                for j, c in enumerate(COLUMNS)}
        return cls(data)
