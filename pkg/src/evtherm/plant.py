"""Lumped-parameter thermal plant of an EV heating circuit.

The continuous state couples a four-node coolant loop, the heated supply
air, a lumped cabin air node, the cabin body shell, four cabin sections,
the battery and its state of charge.  Node balances (temperatures in degC,
powers in W, flows in kg/s):

  cabin air   m_a*c_a * dT_cab = alpha_cab*A_cb*(T_cb - T_cab)
                                  + mdot_a*c_a*(T_ha - T_cab) + Q_occ
  cabin body  m_cb*c_cb * dT_cb = alpha_cb*A_cb*(T_cab - T_cb)
                                  + alpha_cb*A_cb*(T_amb - T_cb) + Q_sol
  heated air  m_a*c_a * dT_ha  = mdot_a*c_a*(T_cab - T_ha)
                                  + gamma_hx*(T_c2 - T_ha)
  section i   m_si*c_a * dT_si = alpha_cb*A_cb_i*(T_cb - T_si)
                                  + mdot_a_i*c_a*(T_ha - T_si) + Q_add_i
  coolant 1   m_c1 * dT_c1 = (mdot_b + mdot_c)*(T_c4 - T_c1) + q_hp/c_cool
  coolant 2   m_c2 * dT_c2 = mdot_c*(T_c1 - T_c2) + gamma_hx*(T_ha - T_c2)/c_cool
  coolant 3   m_c3 * dT_c3 = mdot_b*(T_c1 - T_c3) + gamma_bat*(T_bat - T_c3)/c_cool
  coolant 4   m_c4 * dT_c4 = mdot_c*(T_c2 - T_c4) + mdot_b*(T_c3 - T_c4)
  battery     m_bat*c_bat * dT_bat = gamma_bat*(T_c3 - T_bat) + r_eff*(p_trac/v_nom)^2
  charge      e_batt * dSOC = -(p_trac + q_hp/cop + k_pump*(mdot_b + mdot_c))

Coolant node 1 sits after the heat pump, node 2 after the cabin-side heat
exchanger, node 3 after the battery plate, node 4 is the merge of the two
return branches.  Every pairwise exchange is written in difference form so
a uniform-temperature, zero-source state has an exactly zero derivative
(and an RK4 step is then bitwise the identity).

The right-hand side is broadcast-friendly: it accepts a single state
vector or a matrix of column states, which the receding-horizon layers use
to batch finite-difference rollouts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .errors import DegenerateFlowError, DepletionError, DivergenceError, DomainError

# Compiled prediction kernels; flip off to force the pure-python transitions.
USE_KERNELS = _kernels.HAVE_NUMBA

# Sanity band for any simulated temperature, degC.
TEMP_MIN = -60.0
TEMP_MAX = 150.0

# Flat state layout used by the integrator and the trace writer.
STATE_FIELDS = (
    "t_c1", "t_c2", "t_c3", "t_c4",
    "t_ha", "t_cab", "t_cb",
    "t_s1", "t_s2", "t_s3", "t_s4",
    "t_bat", "soc",
)
N_STATE = len(STATE_FIELDS)

_TC1, _TC2, _TC3, _TC4, _THA, _TCAB, _TCB, _TS1, _TS2, _TS3, _TS4, _TBAT, _SOC = range(N_STATE)

# Upper-layer prediction state: coolant loop, heated air, cabin, body, battery, SOC.
UPPER_FIELDS = ("t_c1", "t_c2", "t_c3", "t_c4", "t_ha", "t_cab", "t_cb", "t_bat", "soc")
# Lower-layer prediction state: sections, heated air, cabin body.
LOWER_FIELDS = ("t_s1", "t_s2", "t_s3", "t_s4", "t_ha", "t_cb")


def _require_finite(name: str, value) -> None:
    if not np.all(np.isfinite(value)):
        raise DomainError(name, f"non-finite value {value!r}")


@dataclass(frozen=True)
class PlantParams:
    """Masses, areas and exchange coefficients for every thermal node.

    Defaults are sized for a compact SUV and are deliberately round; every
    value can be overridden from the config file.  The electrical fields
    (r_eff, v_nom, k_pump) may be zero, all thermal fields must be positive.
    """

    alpha_cab: float = 12.0          # cabin air <-> body, W/(m^2 K)
    alpha_cb: float = 12.0           # body <-> air/ambient, W/(m^2 K)
    a_cb: float = 10.0               # total body surface, m^2
    a_cb_sec: np.ndarray = field(default_factory=lambda: np.full(4, 2.5))
    m_a: float = 3.5                 # lumped cabin air mass, kg
    m_s: np.ndarray = field(default_factory=lambda: np.full(4, 0.875))
    m_cb: float = 120.0              # body shell mass, kg
    c_a: float = 1006.0              # air specific heat, J/(kg K)
    c_cb: float = 500.0              # body specific heat, J/(kg K)
    gamma_hx: float = 350.0          # air/coolant exchanger, W/K
    gamma_bat: float = 250.0         # coolant/battery plate, W/K
    m_c_node: np.ndarray = field(default_factory=lambda: np.full(4, 3.0))
    c_cool: float = 3400.0           # coolant specific heat, J/(kg K)
    q_hp_max: float = 7500.0         # heat pump thermal ceiling, W
    cop: float = 2.5                 # heat pump coefficient of performance
    m_bat: float = 30.0              # battery thermal mass, kg
    c_bat: float = 1000.0            # battery specific heat, J/(kg K)
    e_batt: float = 2.304e8          # usable pack energy, J (64 kWh)
    r_eff: float = 0.12              # effective pack resistance, ohm
    v_nom: float = 360.0             # nominal pack voltage, V
    k_pump: float = 150.0            # pump electric power per unit flow, W/(kg/s)

    def __post_init__(self):
        object.__setattr__(self, "a_cb_sec", np.asarray(self.a_cb_sec, dtype=float))
        object.__setattr__(self, "m_s", np.asarray(self.m_s, dtype=float))
        object.__setattr__(self, "m_c_node", np.asarray(self.m_c_node, dtype=float))
        if self.a_cb_sec.shape != (4,) or self.m_s.shape != (4,) or self.m_c_node.shape != (4,):
            raise DomainError("a_cb_sec/m_s/m_c_node", "expected 4 entries per array")
        positive = {
            "alpha_cab": self.alpha_cab, "alpha_cb": self.alpha_cb, "a_cb": self.a_cb,
            "m_a": self.m_a, "m_cb": self.m_cb, "c_a": self.c_a, "c_cb": self.c_cb,
            "gamma_hx": self.gamma_hx, "gamma_bat": self.gamma_bat,
            "c_cool": self.c_cool, "q_hp_max": self.q_hp_max, "cop": self.cop,
            "m_bat": self.m_bat, "c_bat": self.c_bat, "e_batt": self.e_batt,
            "v_nom": self.v_nom,
        }
        for name, value in positive.items():
            _require_finite(name, value)
            if value <= 0.0:
                raise DomainError(name, f"must be > 0, got {value!r}")
        for name, arr in (("a_cb_sec", self.a_cb_sec), ("m_s", self.m_s),
                          ("m_c_node", self.m_c_node)):
            _require_finite(name, arr)
            if np.any(arr <= 0.0):
                raise DomainError(name, "entries must be > 0")
        for name, value in (("r_eff", self.r_eff), ("v_nom", self.v_nom),
                            ("k_pump", self.k_pump)):
            _require_finite(name, value)
            if value < 0.0:
                raise DomainError(name, "must be >= 0")
        if abs(self.a_cb_sec.sum() - self.a_cb) > 1e-9 * self.a_cb:
            raise DomainError("a_cb_sec", f"sum {self.a_cb_sec.sum()!r} != a_cb {self.a_cb!r}")
        if abs(self.m_s.sum() - self.m_a) > 1e-9 * self.m_a:
            raise DomainError("m_s", f"sum {self.m_s.sum()!r} != m_a {self.m_a!r}")


@dataclass(frozen=True)
class PlantState:
    """Full continuous plant state at one instant."""

    t_c1: float
    t_c2: float
    t_c3: float
    t_c4: float
    t_ha: float
    t_cab: float
    t_cb: float
    t_s: np.ndarray
    t_bat: float
    soc: float

    def __post_init__(self):
        object.__setattr__(self, "t_s", np.asarray(self.t_s, dtype=float))
        if self.t_s.shape != (4,):
            raise DomainError("t_s", "expected 4 section temperatures")
        temps = {
            "t_c1": self.t_c1, "t_c2": self.t_c2, "t_c3": self.t_c3, "t_c4": self.t_c4,
            "t_ha": self.t_ha, "t_cab": self.t_cab, "t_cb": self.t_cb, "t_bat": self.t_bat,
        }
        for name, value in temps.items():
            _require_finite(name, value)
            if not (TEMP_MIN <= value <= TEMP_MAX):
                raise DomainError(name, f"{value!r} outside [{TEMP_MIN}, {TEMP_MAX}] degC")
        _require_finite("t_s", self.t_s)
        if np.any(self.t_s < TEMP_MIN) or np.any(self.t_s > TEMP_MAX):
            raise DomainError("t_s", f"{self.t_s!r} outside [{TEMP_MIN}, {TEMP_MAX}] degC")
        _require_finite("soc", self.soc)
        if not (0.0 <= self.soc <= 1.0):
            raise DomainError("soc", f"{self.soc!r} outside [0, 1]")

    def as_vector(self) -> np.ndarray:
        vec = np.empty(N_STATE)
        vec[_TC1], vec[_TC2], vec[_TC3], vec[_TC4] = self.t_c1, self.t_c2, self.t_c3, self.t_c4
        vec[_THA], vec[_TCAB], vec[_TCB] = self.t_ha, self.t_cab, self.t_cb
        vec[_TS1:_TS4 + 1] = self.t_s
        vec[_TBAT], vec[_SOC] = self.t_bat, self.soc
        return vec

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "PlantState":
        vec = np.asarray(vec, dtype=float)
        return cls(
            t_c1=float(vec[_TC1]), t_c2=float(vec[_TC2]), t_c3=float(vec[_TC3]),
            t_c4=float(vec[_TC4]), t_ha=float(vec[_THA]), t_cab=float(vec[_TCAB]),
            t_cb=float(vec[_TCB]), t_s=vec[_TS1:_TS4 + 1].copy(),
            t_bat=float(vec[_TBAT]), soc=float(vec[_SOC]),
        )

    @classmethod
    def uniform(cls, temp: float, soc: float = 0.9) -> "PlantState":
        """State with every thermal node at the same temperature."""
        return cls(t_c1=temp, t_c2=temp, t_c3=temp, t_c4=temp, t_ha=temp,
                   t_cab=temp, t_cb=temp, t_s=np.full(4, float(temp)),
                   t_bat=temp, soc=soc)


@dataclass(frozen=True)
class ControlInput:
    """Coolant split and per-section air inflows."""

    mdot_b: float                    # coolant to battery branch, kg/s
    mdot_c: float                    # coolant to cabin branch, kg/s
    mdot_a: np.ndarray               # per-section air inflow, kg/s

    def __post_init__(self):
        object.__setattr__(self, "mdot_a", np.asarray(self.mdot_a, dtype=float))
        if self.mdot_a.shape != (4,):
            raise DomainError("mdot_a", "expected 4 section inflows")
        for name, value in (("mdot_b", self.mdot_b), ("mdot_c", self.mdot_c)):
            _require_finite(name, value)
            if value < 0.0:
                raise DomainError(name, "must be >= 0")
        _require_finite("mdot_a", self.mdot_a)
        if np.any(self.mdot_a < 0.0):
            raise DomainError("mdot_a", "entries must be >= 0")

    @property
    def mdot_a_total(self) -> float:
        return float(self.mdot_a.sum())

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.mdot_b, self.mdot_c], self.mdot_a))


@dataclass(frozen=True)
class ActuatorLimits:
    """Hardware boxes, per-sample rate limits and capacity caps.

    Rate limits are expressed per control sample.  Every controller output
    is required to respect these, whatever strategy produced it.
    """

    mdot_b_min: float = 0.02
    mdot_b_max: float = 0.24
    mdot_c_min: float = 0.02
    mdot_c_max: float = 0.24
    mdot_a_min: float = 0.005
    mdot_a_max: float = 0.12
    du_coolant: float = 0.02         # |delta mdot_b|, |delta mdot_c| per sample
    du_air: float = 0.04             # |delta mdot_a_i| per sample
    pump_capacity: float = 0.5      # mdot_b + mdot_c ceiling, kg/s
    blower_capacity: float = 0.24   # sum(mdot_a) ceiling, kg/s

    def __post_init__(self):
        if self.mdot_b_min > self.mdot_b_max or self.mdot_c_min > self.mdot_c_max \
                or self.mdot_a_min > self.mdot_a_max:
            raise DomainError("limits", "min above max")
        if min(self.du_coolant, self.du_air) <= 0.0:
            raise DomainError("limits", "rate limits must be > 0")
        if self.mdot_b_max + self.mdot_c_max > self.pump_capacity + 1e-12:
            raise DomainError("pump_capacity",
                              "coolant boxes admit flows above the pump capacity")

    def check(self, u: ControlInput, u_prev: ControlInput | None = None,
              tol: float = 1e-9) -> None:
        """Raise if ``u`` violates a box, the pump cap, or a rate limit."""
        def box(name, val, lo, hi):
            if not (lo - tol <= val <= hi + tol):
                raise DomainError(name, f"{val!r} outside [{lo}, {hi}]")
        box("mdot_b", u.mdot_b, self.mdot_b_min, self.mdot_b_max)
        box("mdot_c", u.mdot_c, self.mdot_c_min, self.mdot_c_max)
        for i in range(4):
            box(f"mdot_a[{i}]", float(u.mdot_a[i]), self.mdot_a_min, self.mdot_a_max)
        if u.mdot_b + u.mdot_c > self.pump_capacity + tol:
            raise DomainError("pump_capacity", f"{u.mdot_b + u.mdot_c!r} above cap")
        if u_prev is not None:
            if abs(u.mdot_b - u_prev.mdot_b) > self.du_coolant + tol:
                raise DomainError("du mdot_b", "rate limit exceeded")
            if abs(u.mdot_c - u_prev.mdot_c) > self.du_coolant + tol:
                raise DomainError("du mdot_c", "rate limit exceeded")
            if np.any(np.abs(u.mdot_a - u_prev.mdot_a) > self.du_air + tol):
                raise DomainError("du mdot_a", "rate limit exceeded")


@dataclass(frozen=True)
class DisturbanceInput:
    """Exogenous signals entering the plant at one instant."""

    t_amb: float                     # ambient temperature, degC
    q_occ: float = 0.0               # occupant heat into the lumped cabin, W
    q_sol: float = 0.0               # solar heat into the body, W
    q_add: np.ndarray = field(default_factory=lambda: np.zeros(4))
    p_trac: float = 0.0              # traction power draw, W

    def __post_init__(self):
        object.__setattr__(self, "q_add", np.asarray(self.q_add, dtype=float))
        if self.q_add.shape != (4,):
            raise DomainError("q_add", "expected 4 section heat terms")
        for name, value in (("t_amb", self.t_amb), ("q_occ", self.q_occ),
                            ("q_sol", self.q_sol), ("p_trac", self.p_trac)):
            _require_finite(name, value)
        _require_finite("q_add", self.q_add)
        if self.q_occ < 0.0:
            raise DomainError("q_occ", "must be >= 0")
        if self.q_sol < 0.0:
            raise DomainError("q_sol", "must be >= 0")


@dataclass(frozen=True)
class HeatPumpLaw:
    """Thermostatic heat-pump command shared by plant and prediction models.

    Output is the full ceiling while the colder of (cabin, battery) is at
    least one throttle band below its setpoint, ramps linearly to zero as
    both reach their setpoints, and stays zero above them.  Throttling
    ahead of the setpoint keeps the steady state at or below it, so any
    excursion above the setpoint is a genuine transient.
    """

    t_set_cab: float = 23.0
    t_set_bat: float = 20.0
    band: float = 0.5

    def command(self, params: PlantParams, t_cab, t_bat):
        err = np.maximum(self.t_set_cab - t_cab, self.t_set_bat - t_bat)
        return params.q_hp_max * np.clip(err / self.band, 0.0, 1.0)


def cabin_air_mean(t_s: np.ndarray, params: PlantParams):
    """Mass-weighted mean section temperature, the measured cabin value."""
    return np.tensordot(params.m_s, np.asarray(t_s), axes=(0, 0)) / params.m_s.sum()


# ---------------------------------------------------------------------------
# Continuous-time right-hand sides
# ---------------------------------------------------------------------------

def lumped_cabin_deriv(state: PlantState, params: PlantParams, u: ControlInput,
                       d: DisturbanceInput) -> tuple[float, float]:
    """Rates of the lumped cabin air and cabin body nodes, K/s."""
    mdot_a = u.mdot_a_total
    dt_cab = (params.alpha_cab * params.a_cb * (state.t_cb - state.t_cab)
              + mdot_a * params.c_a * (state.t_ha - state.t_cab)
              + d.q_occ) / (params.m_a * params.c_a)
    dt_cb = (params.alpha_cb * params.a_cb * (state.t_cab - state.t_cb)
             + params.alpha_cb * params.a_cb * (d.t_amb - state.t_cb)
             + d.q_sol) / (params.m_cb * params.c_cb)
    return float(dt_cab), float(dt_cb)


def heated_air_deriv(state: PlantState, params: PlantParams, u: ControlInput) -> float:
    """Rate of the heated supply-air node, K/s."""
    mdot_a = u.mdot_a_total
    return float((mdot_a * params.c_a * (state.t_cab - state.t_ha)
                  + params.gamma_hx * (state.t_c2 - state.t_ha))
                 / (params.m_a * params.c_a))


def sections_deriv(state: PlantState, params: PlantParams, u: ControlInput,
                   d: DisturbanceInput) -> np.ndarray:
    """Rates of the four cabin-section nodes, K/s."""
    return ((params.alpha_cb * params.a_cb_sec * (state.t_cb - state.t_s)
             + u.mdot_a * params.c_a * (state.t_ha - state.t_s)
             + d.q_add) / (params.m_s * params.c_a))


def coolant_deriv(state: PlantState, params: PlantParams, u: ControlInput,
                  q_hp: float) -> np.ndarray:
    """Rates of the four coolant loop nodes, K/s."""
    if not (0.0 <= q_hp <= params.q_hp_max + 1e-9):
        raise DomainError("q_hp", f"{q_hp!r} outside [0, {params.q_hp_max}]")
    total = u.mdot_b + u.mdot_c
    if total <= 0.0:
        raise DegenerateFlowError("mdot_b + mdot_c must be > 0")
    m1, m2, m3, m4 = params.m_c_node
    d1 = (total * (state.t_c4 - state.t_c1) + q_hp / params.c_cool) / m1
    d2 = (u.mdot_c * (state.t_c1 - state.t_c2)
          + params.gamma_hx * (state.t_ha - state.t_c2) / params.c_cool) / m2
    d3 = (u.mdot_b * (state.t_c1 - state.t_c3)
          + params.gamma_bat * (state.t_bat - state.t_c3) / params.c_cool) / m3
    d4 = (u.mdot_c * (state.t_c2 - state.t_c4)
          + u.mdot_b * (state.t_c3 - state.t_c4)) / m4
    return np.array([d1, d2, d3, d4])


def battery_soc_deriv(state: PlantState, params: PlantParams, u: ControlInput,
                      d: DisturbanceInput, q_hp: float) -> tuple[float, float]:
    """Battery temperature rate (K/s) and SOC rate (1/s)."""
    q_loss = params.r_eff * (d.p_trac / params.v_nom) ** 2
    dt_bat = (params.gamma_bat * (state.t_c3 - state.t_bat) + q_loss) \
        / (params.m_bat * params.c_bat)
    p_aux = params.k_pump * (u.mdot_b + u.mdot_c)
    dsoc = -(d.p_trac + q_hp / params.cop + p_aux) / params.e_batt
    return float(dt_bat), float(dsoc)


def full_deriv(state: PlantState, params: PlantParams, u: ControlInput,
               d: DisturbanceInput, q_hp: float) -> np.ndarray:
    """Concatenated state derivative in STATE_FIELDS order."""
    if u.mdot_b + u.mdot_c <= 0.0:
        raise DegenerateFlowError("mdot_b + mdot_c must be > 0")
    return _rhs(state.as_vector(), params, u.as_vector(), _dist_vector(d), q_hp)


def _dist_vector(d: DisturbanceInput) -> np.ndarray:
    return np.concatenate(([d.t_amb, d.q_occ, d.q_sol], d.q_add, [d.p_trac]))


def _rhs(x, params: PlantParams, u, dist, q_hp):
    """Vectorized right-hand side over the 13-entry state layout.

    ``x`` is (13,) or (13, B); ``u`` is (6,) or (6, B) as
    [mdot_b, mdot_c, mdot_a1..4]; ``dist`` is (8,) or (8, B) as
    [t_amb, q_occ, q_sol, q_add1..4, p_trac]; ``q_hp`` is scalar or (B,).
    """
    p = params
    mdot_b, mdot_c = u[0], u[1]
    mdot_a = u[2:6]
    mdot_a_tot = mdot_a[0] + mdot_a[1] + mdot_a[2] + mdot_a[3]
    t_amb, q_occ, q_sol = dist[0], dist[1], dist[2]
    q_add = dist[3:7]
    p_trac = dist[7]

    dx = np.empty_like(x)
    total = mdot_b + mdot_c
    dx[_TC1] = (total * (x[_TC4] - x[_TC1]) + q_hp / p.c_cool) / p.m_c_node[0]
    dx[_TC2] = (mdot_c * (x[_TC1] - x[_TC2])
                + p.gamma_hx * (x[_THA] - x[_TC2]) / p.c_cool) / p.m_c_node[1]
    dx[_TC3] = (mdot_b * (x[_TC1] - x[_TC3])
                + p.gamma_bat * (x[_TBAT] - x[_TC3]) / p.c_cool) / p.m_c_node[2]
    dx[_TC4] = (mdot_c * (x[_TC2] - x[_TC4])
                + mdot_b * (x[_TC3] - x[_TC4])) / p.m_c_node[3]
    dx[_THA] = (mdot_a_tot * p.c_a * (x[_TCAB] - x[_THA])
                + p.gamma_hx * (x[_TC2] - x[_THA])) / (p.m_a * p.c_a)
    dx[_TCAB] = (p.alpha_cab * p.a_cb * (x[_TCB] - x[_TCAB])
                 + mdot_a_tot * p.c_a * (x[_THA] - x[_TCAB])
                 + q_occ) / (p.m_a * p.c_a)
    dx[_TCB] = (p.alpha_cb * p.a_cb * (x[_TCAB] - x[_TCB])
                + p.alpha_cb * p.a_cb * (t_amb - x[_TCB])
                + q_sol) / (p.m_cb * p.c_cb)
    for i in range(4):
        dx[_TS1 + i] = (p.alpha_cb * p.a_cb_sec[i] * (x[_TCB] - x[_TS1 + i])
                        + mdot_a[i] * p.c_a * (x[_THA] - x[_TS1 + i])
                        + q_add[i]) / (p.m_s[i] * p.c_a)
    q_loss = p.r_eff * (p_trac / p.v_nom) ** 2
    dx[_TBAT] = (p.gamma_bat * (x[_TC3] - x[_TBAT]) + q_loss) / (p.m_bat * p.c_bat)
    dx[_SOC] = -(p_trac + q_hp / p.cop + p.k_pump * total) / p.e_batt
    return dx


def _rk4(f: Callable, x, dt: float):
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(state: PlantState, params: PlantParams, u: ControlInput,
         d: DisturbanceInput, q_hp: float, dt: float) -> PlantState:
    """One fixed-step RK4 advance with u, d and q_hp held constant."""
    if not (0.0 < dt <= 1.0):
        raise DomainError("dt", f"{dt!r} outside (0, 1] s")
    if u.mdot_b + u.mdot_c <= 0.0:
        raise DegenerateFlowError("mdot_b + mdot_c must be > 0")
    u_vec = u.as_vector()
    d_vec = _dist_vector(d)
    x = state.as_vector()
    x_next = _rk4(lambda xv: _rhs(xv, params, u_vec, d_vec, q_hp), x, dt)

    if x_next[_SOC] < 0.0:
        frac = x[_SOC] / max(x[_SOC] - x_next[_SOC], 1e-300)
        raise DepletionError(t_depleted=frac * dt)
    temps = x_next[:_SOC]
    if not np.all(np.isfinite(temps)) or np.any(temps < TEMP_MIN) or np.any(temps > TEMP_MAX):
        bad = int(np.argmax(~((temps >= TEMP_MIN) & (temps <= TEMP_MAX))))
        raise DivergenceError(STATE_FIELDS[bad], float(temps[bad]))
    if x_next[_SOC] > 1.0:
        x_next[_SOC] = 1.0
    return PlantState.from_vector(x_next)


# ---------------------------------------------------------------------------
# Discrete transitions for the receding-horizon layers
# ---------------------------------------------------------------------------

def _substeps(dt_ctrl: float, model_dt: float) -> int:
    n = int(round(dt_ctrl / model_dt))
    if n < 1 or abs(n * model_dt - dt_ctrl) > 1e-9:
        raise DomainError("model_dt", f"{model_dt!r} does not divide dt_ctrl {dt_ctrl!r}")
    return n


def _as_batch(x) -> tuple[np.ndarray, bool]:
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim == 1:
        return x[:, None], True
    return x, False


def make_upper_transition(params: PlantParams, law: HeatPumpLaw, t_amb: float,
                          q_occ: float, q_sol: float, p_trac: float,
                          mdot_a_total: float, dt_ctrl: float,
                          model_dt: float = 1.0) -> Callable:
    """Discrete coolant-allocation model over one control period.

    State is the 9-entry vector [t_c1..4, t_ha, t_cab, t_cb, t_bat, soc];
    input is [mdot_b, mdot_c].  Disturbances and the total air inflow are
    frozen at their current values; the heat-pump command follows the
    thermostatic law on the predicted cabin/battery temperatures,
    re-evaluated at the start of each substep like the plant integrator.
    Accepts (9,) or (9, B) states with matching inputs.
    """
    n_sub = _substeps(dt_ctrl, model_dt)
    p = params

    if USE_KERNELS:
        pv = np.array([
            p.m_c_node[0], p.m_c_node[1], p.m_c_node[2], p.m_c_node[3],
            p.c_cool, p.gamma_hx, p.gamma_bat, p.c_a, p.m_a,
            p.alpha_cab, p.a_cb, p.alpha_cb, p.m_cb, p.c_cb,
            p.r_eff, p.v_nom, p.m_bat, p.c_bat, p.k_pump, p.cop, p.e_batt,
            p.q_hp_max, law.t_set_cab, law.t_set_bat, law.band,
            t_amb, q_occ, q_sol, p_trac, mdot_a_total,
        ])

        def transition(x, u, k=0):
            xb, squeeze = _as_batch(x)
            ub, _ = _as_batch(u)
            out = _kernels.upper_stage(xb, ub, pv, n_sub, model_dt)
            return out[:, 0] if squeeze else out

        return transition

    m1, m2, m3, m4 = p.m_c_node

    def rhs(x, u, q_hp):
        mdot_b, mdot_c = u[0], u[1]
        total = mdot_b + mdot_c
        dx = np.empty_like(x)
        dx[0] = (total * (x[3] - x[0]) + q_hp / p.c_cool) / m1
        dx[1] = (mdot_c * (x[0] - x[1]) + p.gamma_hx * (x[4] - x[1]) / p.c_cool) / m2
        dx[2] = (mdot_b * (x[0] - x[2]) + p.gamma_bat * (x[7] - x[2]) / p.c_cool) / m3
        dx[3] = (mdot_c * (x[1] - x[3]) + mdot_b * (x[2] - x[3])) / m4
        dx[4] = (mdot_a_total * p.c_a * (x[5] - x[4])
                 + p.gamma_hx * (x[1] - x[4])) / (p.m_a * p.c_a)
        dx[5] = (p.alpha_cab * p.a_cb * (x[6] - x[5])
                 + mdot_a_total * p.c_a * (x[4] - x[5]) + q_occ) / (p.m_a * p.c_a)
        dx[6] = (p.alpha_cb * p.a_cb * (x[5] - x[6])
                 + p.alpha_cb * p.a_cb * (t_amb - x[6]) + q_sol) / (p.m_cb * p.c_cb)
        q_loss = p.r_eff * (p_trac / p.v_nom) ** 2
        dx[7] = (p.gamma_bat * (x[2] - x[7]) + q_loss) / (p.m_bat * p.c_bat)
        dx[8] = -(p_trac + q_hp / p.cop + p.k_pump * total) / p.e_batt
        return dx

    def transition(x, u, k=0):
        x = np.array(x, dtype=float)
        for _ in range(n_sub):
            q_hp = law.command(p, x[5], x[7])
            x = _rk4(lambda xv: rhs(xv, u, q_hp), x, model_dt)
        x[8] = np.clip(x[8], 0.0, 1.0)
        return x

    return transition


def make_lower_transition(params: PlantParams, t_cab: float, t_c2: float,
                          t_amb: float, q_sol: float, q_add_fn: Callable,
                          t_now: float, dt_ctrl: float,
                          model_dt: float = 1.0) -> Callable:
    """Discrete air-distribution model over one control period.

    State is [t_s1..4, t_ha, t_cb]; input is the four section inflows.
    The lumped cabin return temperature and coolant node 2 are frozen;
    ``q_add_fn(t_abs, t_s)`` supplies the per-section heat forecast, so a
    door signal with a known close time decays inside the horizon.  The
    forecast is evaluated at the start of each substep and held across its
    RK4 stages; the kernel path additionally assumes it is affine in the
    section temperatures (true of every scenario forecast).
    """
    n_sub = _substeps(dt_ctrl, model_dt)
    p = params

    if USE_KERNELS:
        pv = np.concatenate((
            p.alpha_cb * p.a_cb_sec, p.m_s * p.c_a,
            [p.c_a, p.m_a, p.gamma_hx, p.alpha_cb * p.a_cb, p.m_cb * p.c_cb,
             t_cab, t_c2, t_amb, q_sol],
        ))
        cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        eye = np.eye(4)

        def coeffs(k: int):
            got = cache.get(k)
            if got is None:
                slopes = np.empty((n_sub, 4))
                offsets = np.empty((n_sub, 4))
                for j in range(n_sub):
                    t_abs = t_now + k * dt_ctrl + j * model_dt
                    base = np.asarray(q_add_fn(t_abs, np.zeros(4)), dtype=float)
                    for i in range(4):
                        slopes[j, i] = float(q_add_fn(t_abs, eye[i])[i]) - base[i]
                    offsets[j] = base
                got = (slopes, offsets)
                cache[k] = got
            return got

        def transition(x, u, k=0):
            xb, squeeze = _as_batch(x)
            ub, _ = _as_batch(u)
            slopes, offsets = coeffs(int(k))
            out = _kernels.lower_stage(xb, ub, pv, slopes, offsets, model_dt)
            return out[:, 0] if squeeze else out

        return transition

    def rhs(x, u, q_add):
        mdot_a_tot = u[0] + u[1] + u[2] + u[3]
        dx = np.empty_like(x)
        for i in range(4):
            dx[i] = (p.alpha_cb * p.a_cb_sec[i] * (x[5] - x[i])
                     + u[i] * p.c_a * (x[4] - x[i])
                     + q_add[i]) / (p.m_s[i] * p.c_a)
        dx[4] = (mdot_a_tot * p.c_a * (t_cab - x[4])
                 + p.gamma_hx * (t_c2 - x[4])) / (p.m_a * p.c_a)
        dx[5] = (p.alpha_cb * p.a_cb * (t_cab - x[5])
                 + p.alpha_cb * p.a_cb * (t_amb - x[5]) + q_sol) / (p.m_cb * p.c_cb)
        return dx

    def transition(x, u, k=0):
        x = np.array(x, dtype=float)
        for j in range(n_sub):
            t_abs = t_now + k * dt_ctrl + j * model_dt
            q_add = np.asarray(q_add_fn(t_abs, x[0:4]), dtype=float)
            x = _rk4(lambda xv: rhs(xv, u, q_add), x, model_dt)
        return x

    return transition


def upper_state(state: PlantState, params: PlantParams,
                measured_cabin: bool = True) -> np.ndarray:
    """Project a plant state onto the coolant-allocation model state.

    The cabin entry is the mass-weighted section mean by default: that is
    what a cabin air sensor reads, and it is the only path through which a
    door event reaches the coolant layer and the heat-pump thermostat.
    """
    t_cab = float(cabin_air_mean(state.t_s, params)) if measured_cabin else state.t_cab
    return np.array([state.t_c1, state.t_c2, state.t_c3, state.t_c4,
                     state.t_ha, t_cab, state.t_cb, state.t_bat, state.soc])


def lower_state(state: PlantState) -> np.ndarray:
    """Project a plant state onto the air-distribution model state."""
    return np.concatenate((state.t_s, [state.t_ha, state.t_cb]))
