"""Exogenous signal generation: ambient, solar, traction, doors, passengers.

A scenario is immutable after construction and every lookup is a pure
function of (scenario, time, section temperatures), so the same scenario
can drive the plant, the controllers' forecasts and the metrics without
shared state.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError

SECTIONS = (1, 2, 3, 4)


@dataclass(frozen=True)
class DoorEvent:
    """One door opening: section ``section`` is open on [t_open, t_open + duration)."""

    t_open: float
    duration: float
    section: int = 4

    def __post_init__(self):
        if self.duration <= 0.0:
            raise DomainError("duration", "must be > 0")
        if self.section not in SECTIONS:
            raise DomainError("section", f"{self.section!r} not in 1..4")

    @property
    def t_close(self) -> float:
        return self.t_open + self.duration


@dataclass(frozen=True)
class PassengerEvent:
    """A passenger boarding section ``section`` at ``t_board``."""

    t_board: float
    section: int = 4
    q_occ_person: float = 80.0

    def __post_init__(self):
        if self.q_occ_person < 0.0:
            raise DomainError("q_occ_person", "must be >= 0")
        if self.section not in SECTIONS:
            raise DomainError("section", f"{self.section!r} not in 1..4")


def _check_profile(name: str, table) -> tuple[tuple[float, ...], tuple[float, ...]]:
    rows = [(float(t), float(v)) for t, v in table]
    if not rows:
        raise ConfigError(f"{name}: empty table")
    times = [t for t, _ in rows]
    if sorted(times) != times:
        raise ConfigError(f"{name}: breakpoints must be non-decreasing")
    return tuple(times), tuple(v for _, v in rows)


@dataclass(frozen=True)
class Scenario:
    """Declarative description of one drive with heating disturbances."""

    duration: float = 1800.0
    t_amb_profile: tuple = ((0.0, -7.0),)          # piecewise-constant degC
    q_sol_profile: tuple = ((0.0, 0.0),)           # piecewise-constant W
    drive_cycle: tuple = ((0.0, 0.0),)             # linearly interpolated W
    door_events: tuple = ()
    passenger_events: tuple = ()
    t_set_cab: float = 23.0
    t_set_bat: float = 20.0
    q_occ_base: float = 0.0                        # standing occupant heat, W
    q_occ_base_section: int = 1
    door_loss_coeff: float = 30.0                  # W/K while a door is open
    propagation_delay: float = 3.0                 # s before chill spreads
    spread_fractions: tuple = (0.2, 0.2, 0.5)      # non-door sections, ascending
    detection_window: float = 60.0                 # s a boarding stays detectable

    def __post_init__(self):
        if self.duration <= 0.0:
            raise DomainError("duration", "must be > 0")
        object.__setattr__(self, "t_amb_profile",
                           _check_profile("t_amb_profile", self.t_amb_profile))
        object.__setattr__(self, "q_sol_profile",
                           _check_profile("q_sol_profile", self.q_sol_profile))
        object.__setattr__(self, "drive_cycle",
                           _check_profile("drive_cycle", self.drive_cycle))
        object.__setattr__(self, "door_events", tuple(self.door_events))
        object.__setattr__(self, "passenger_events", tuple(self.passenger_events))
        spreads = tuple(float(s) for s in self.spread_fractions)
        if len(spreads) != 3 or any(not (0.0 <= s <= 1.0) for s in spreads):
            raise DomainError("spread_fractions", "need 3 weights in [0, 1]")
        if spreads[2] < max(spreads[0], spreads[1]):
            raise DomainError("spread_fractions",
                              "third section weight must be the largest")
        object.__setattr__(self, "spread_fractions", spreads)
        if self.q_occ_base < 0.0:
            raise DomainError("q_occ_base", "must be >= 0")
        if self.q_occ_base_section not in SECTIONS:
            raise DomainError("q_occ_base_section", "not in 1..4")
        if self.door_loss_coeff < 0.0:
            raise DomainError("door_loss_coeff", "must be >= 0")
        if self.propagation_delay < 0.0:
            raise DomainError("propagation_delay", "must be >= 0")

    # -- signal lookups -----------------------------------------------------

    def _piecewise(self, profile, t: float) -> float:
        times, values = profile
        idx = bisect.bisect_right(times, t) - 1
        return values[max(idx, 0)]

    def ambient(self, t: float) -> float:
        return self._piecewise(self.t_amb_profile, t)

    def q_sol(self, t: float) -> float:
        return self._piecewise(self.q_sol_profile, t)

    def traction_power(self, t: float) -> float:
        times, values = self.drive_cycle
        return float(np.interp(t, times, values))

    def door_signal(self, t: float) -> bool:
        return any(ev.t_open <= t < ev.t_close for ev in self.door_events)

    def q_occ_total(self, t: float) -> float:
        boarded = sum(ev.q_occ_person for ev in self.passenger_events
                      if t >= ev.t_board)
        return self.q_occ_base + boarded

    def q_add(self, t: float, t_s):
        """Per-section additional heat at time ``t`` for section temps ``t_s``.

        Door losses pull the open section toward ambient immediately and the
        other sections, weighted by the spread fractions, once the chill has
        had ``propagation_delay`` seconds to travel.  Occupant heat adds to
        whichever section each person sits in.  ``t_s`` may be (4,) or (4, B).
        """
        t_s = np.asarray(t_s, dtype=float)
        qa = np.zeros_like(t_s)
        t_amb = self.ambient(t)
        for ev in self.door_events:
            if not (ev.t_open <= t < ev.t_close):
                continue
            j = ev.section - 1
            qa[j] = qa[j] - self.door_loss_coeff * (t_s[j] - t_amb)
            if t >= ev.t_open + self.propagation_delay:
                others = [i for i in range(4) if i != j]
                for rank, i in enumerate(others):
                    qa[i] = qa[i] - self.spread_fractions[rank] \
                        * self.door_loss_coeff * (t_s[i] - t_amb)
        if self.q_occ_base > 0.0:
            i = self.q_occ_base_section - 1
            qa[i] = qa[i] + self.q_occ_base
        for ev in self.passenger_events:
            if t >= ev.t_board:
                i = ev.section - 1
                qa[i] = qa[i] + ev.q_occ_person
        return qa

    def passenger_signal(self, t: float) -> int | None:
        """Section of the most recent boarding still inside the detection window."""
        live = [ev for ev in self.passenger_events
                if ev.t_board <= t <= ev.t_board + self.detection_window]
        if not live:
            return None
        return max(live, key=lambda ev: ev.t_board).section
