"""Closed-loop heating strategies: hierarchical NMPC, single MPC, rule-based.

All three expose ``step(state, t, signals) -> ControllerOutput`` sampled at
the control period.  Each instance owns its warm-start memory (and, for the
hierarchical strategy, the door latch), so one instance drives exactly one
simulation.

The coolant layer and the heat-pump thermostat read the cabin temperature
a sensor would read: the mass-weighted mean of the four section nodes.
The lumped cabin state remains the prediction model inside the horizon.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import optimizer, plant
from .errors import DomainError
from .optimizer import OcpSpec, SoftStateBounds, SolveResult
from .plant import ActuatorLimits, ControlInput, HeatPumpLaw, PlantParams, PlantState

CONTROLLER_NAMES = ("hierarchical", "single_mpc", "rule_based")


@dataclass(frozen=True)
class StepSignals:
    """Everything a controller may observe at one sample."""

    door_signal: bool
    passenger_section: Optional[int]
    t_amb: float
    q_occ: float
    q_sol: float
    p_trac: float
    q_add_fn: Callable                 # (t_abs, t_s) -> per-section heat forecast


@dataclass(frozen=True)
class ControllerOutput:
    u: ControlInput
    lower_layer_active: bool = False
    diagnostics: dict = field(default_factory=dict)


@dataclass
class UpperMpcConfig:
    """Coolant-split layer: weighted cabin/battery tracking."""

    alpha: float = 0.6                 # cabin weight; battery gets (1 - alpha)
    t_set_c: float = 23.0
    t_set_b: float = 20.0
    horizon: int = 10
    dt_ctrl: float = 5.0
    model_dt: float = 1.0
    t_cab_soft: tuple = (10.0, 25.0)
    t_bat_soft: tuple = (5.0, 40.0)
    rho: float = 1e3
    max_iter: int = 200
    tol_rel: float = 1e-9

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise DomainError("alpha", "must be in [0, 1]")
        if self.horizon < 1:
            raise DomainError("horizon", "must be >= 1")


@dataclass
class LowerMpcConfig:
    """Air-distribution layer: per-section tracking with smooth inputs."""

    alpha_sec: tuple = (1.0, 1.0, 1.0, 1.0)
    beta: float = 0.5                  # rate-change penalty
    t_set_c: float = 23.0
    horizon: int = 10
    dt_ctrl: float = 5.0
    model_dt: float = 1.0
    t_s_floor: float = 15.0            # soft floor per section
    rho: float = 1e3
    rho_blower: float = 1e5            # soft penalty on total air above capacity
    delta: float = 0.3                 # recovery tolerance, degC
    timeout: float = 600.0             # latch timeout, s
    max_iter: int = 200
    tol_rel: float = 1e-9

    def __post_init__(self):
        if any(a < 0.0 for a in self.alpha_sec) or self.beta < 0.0:
            raise DomainError("alpha_sec/beta", "weights must be >= 0")


@dataclass
class RuleConfig:
    """Thermostat-style strategy from the benchmark suite."""

    t_bound_min: float = 5.0           # battery threshold, degC
    mdot_battery_phase: tuple = (0.18, 0.07)   # (mdot_b, mdot_c), battery first
    mdot_cabin_phase: tuple = (0.02, 0.24)     # after the battery has warmed
    air_default_total: float = 0.16
    boost_section_flow: float = 0.07   # passenger-section inflow during boost
    boost_other_flow: float = 0.055
    boost_duration: float = 180.0

    def __post_init__(self):
        if not self.mdot_battery_phase[0] > self.mdot_battery_phase[1]:
            raise DomainError("mdot_battery_phase", "needs mdot_b > mdot_c")
        if not self.mdot_cabin_phase[0] <= self.mdot_cabin_phase[1]:
            raise DomainError("mdot_cabin_phase", "needs mdot_b <= mdot_c")


def default_air_split(limits: ActuatorLimits, total: float) -> np.ndarray:
    split = np.full(4, total / 4.0)
    return np.clip(split, limits.mdot_a_min, limits.mdot_a_max)


def _ramp_toward(target: np.ndarray, prev: np.ndarray, du: float,
                 lo, hi) -> np.ndarray:
    """One rate-limited move from ``prev`` toward ``target`` inside the box."""
    stepped = np.clip(target, prev - du, prev + du)
    return np.clip(stepped, lo, hi)


class UpperMpc:
    """Receding-horizon coolant allocation over the 9-entry loop model."""

    def __init__(self, cfg: UpperMpcConfig, params: PlantParams,
                 law: HeatPumpLaw, limits: ActuatorLimits):
        self.cfg = cfg
        self.params = params
        self.law = law
        self.limits = limits
        self._warm: np.ndarray | None = None
        self._u_box = (np.array([limits.mdot_b_min, limits.mdot_c_min]),
                       np.array([limits.mdot_b_max, limits.mdot_c_max]))
        inf = np.inf
        lower = np.full(9, -inf)
        upper = np.full(9, inf)
        lower[5], upper[5] = cfg.t_cab_soft
        lower[7], upper[7] = cfg.t_bat_soft
        self._bounds = SoftStateBounds(lower=lower, upper=upper, rho=cfg.rho)

    def reset(self):
        self._warm = None

    def step(self, state: PlantState, u_prev: np.ndarray,
             sig: StepSignals, mdot_a_total: float) -> tuple[np.ndarray, SolveResult]:
        cfg = self.cfg
        dyn = plant.make_upper_transition(
            self.params, self.law, sig.t_amb, sig.q_occ, sig.q_sol, sig.p_trac,
            mdot_a_total, cfg.dt_ctrl, cfg.model_dt)
        alpha = cfg.alpha

        def stage(x, u, du, k):
            return (alpha * (cfg.t_set_c - x[5]) ** 2
                    + (1.0 - alpha) * (cfg.t_set_b - x[7]) ** 2)

        spec = OcpSpec(
            horizon_np=cfg.horizon, dt=cfg.dt_ctrl, n_u=2,
            dynamics=dyn, stage_cost=stage,
            u_min=self._u_box[0], u_max=self._u_box[1],
            du_min=np.full(2, -self.limits.du_coolant),
            du_max=np.full(2, self.limits.du_coolant),
            state_bounds=self._bounds, vectorized=True,
            max_iter=cfg.max_iter, tol_rel=cfg.tol_rel)
        x0 = plant.upper_state(state, self.params)
        res = optimizer.solve(spec, x0, u_prev, warm_start=self._warm)
        self._warm = optimizer.shift_warm_start(res.u_seq)
        return res.u_seq[0].copy(), res


class LowerMpc:
    """Receding-horizon air distribution over the 6-entry section model."""

    def __init__(self, cfg: LowerMpcConfig, params: PlantParams,
                 limits: ActuatorLimits):
        self.cfg = cfg
        self.params = params
        self.limits = limits
        self._warm: np.ndarray | None = None
        lower = np.array([cfg.t_s_floor] * 4 + [-np.inf, -np.inf])
        upper = np.full(6, np.inf)
        self._bounds = SoftStateBounds(lower=lower, upper=upper, rho=cfg.rho)
        self._alpha_sec = np.asarray(cfg.alpha_sec, dtype=float)

    def reset(self):
        self._warm = None

    def step(self, state: PlantState, u_prev_air: np.ndarray, t_now: float,
             sig: StepSignals) -> tuple[np.ndarray, SolveResult]:
        cfg = self.cfg
        dyn = plant.make_lower_transition(
            self.params, state.t_cab, state.t_c2, sig.t_amb, sig.q_sol,
            sig.q_add_fn, t_now, cfg.dt_ctrl, cfg.model_dt)
        alpha_sec = self._alpha_sec
        cap = self.limits.blower_capacity
        rho_blower = cfg.rho_blower

        def stage(x, u, du, k):
            track = (alpha_sec[0] * (x[0] - cfg.t_set_c) ** 2
                     + alpha_sec[1] * (x[1] - cfg.t_set_c) ** 2
                     + alpha_sec[2] * (x[2] - cfg.t_set_c) ** 2
                     + alpha_sec[3] * (x[3] - cfg.t_set_c) ** 2)
            smooth = cfg.beta * (du * du).sum(axis=0)
            over = np.maximum(u.sum(axis=0) - cap, 0.0)
            return track + smooth + rho_blower * over * over

        spec = OcpSpec(
            horizon_np=cfg.horizon, dt=cfg.dt_ctrl, n_u=4,
            dynamics=dyn, stage_cost=stage,
            u_min=np.full(4, self.limits.mdot_a_min),
            u_max=np.full(4, self.limits.mdot_a_max),
            du_min=np.full(4, -self.limits.du_air),
            du_max=np.full(4, self.limits.du_air),
            state_bounds=self._bounds, vectorized=True,
            max_iter=cfg.max_iter, tol_rel=cfg.tol_rel)
        x0 = plant.lower_state(state)
        res = optimizer.solve(spec, x0, u_prev_air, warm_start=self._warm)
        self._warm = optimizer.shift_warm_start(res.u_seq)
        return res.u_seq[0].copy(), res


class HierarchicalController:
    """Upper coolant layer always on; air layer latched by door events.

    The latch is set whenever the door signal is high and cleared once every
    section is back within ``delta`` of the setpoint or the timeout elapses.
    While the latch is off the air split ramps back to the default equal
    distribution at the actuator rate limit.
    """

    name = "hierarchical"

    def __init__(self, upper_cfg: UpperMpcConfig, lower_cfg: LowerMpcConfig,
                 params: PlantParams, law: HeatPumpLaw, limits: ActuatorLimits,
                 air_total: float = 0.16):
        self.upper = UpperMpc(upper_cfg, params, law, limits)
        self.lower = LowerMpc(lower_cfg, params, limits)
        self.limits = limits
        self.lower_cfg = lower_cfg
        self.default_air = default_air_split(limits, air_total)
        self._latched = False
        self._activated_at = 0.0
        self._u_prev: ControlInput | None = None

    @property
    def u_prev(self) -> ControlInput:
        if self._u_prev is None:
            return ControlInput(mdot_b=self.limits.mdot_b_min,
                                mdot_c=self.limits.mdot_c_min,
                                mdot_a=self.default_air.copy())
        return self._u_prev

    def _update_latch(self, state: PlantState, t: float, door: bool):
        if door:
            if not self._latched:
                self._activated_at = t
            self._latched = True
            return
        if self._latched:
            recovered = bool(np.all(np.abs(state.t_s - self.lower_cfg.t_set_c)
                                    <= self.lower_cfg.delta))
            timed_out = (t - self._activated_at) >= self.lower_cfg.timeout
            if recovered or timed_out:
                self._latched = False

    def step(self, state: PlantState, t: float, sig: StepSignals) -> ControllerOutput:
        u_prev = self.u_prev
        self._update_latch(state, t, sig.door_signal)
        coolant, res_up = self.upper.step(
            state, np.array([u_prev.mdot_b, u_prev.mdot_c]), sig,
            u_prev.mdot_a_total)
        diags = {"upper_cost": res_up.cost, "upper_iterations": res_up.iterations}
        if self._latched:
            air, res_lo = self.lower.step(state, u_prev.mdot_a, t, sig)
            diags.update(lower_cost=res_lo.cost, lower_iterations=res_lo.iterations)
        else:
            self.lower.reset()
            air = _ramp_toward(self.default_air, u_prev.mdot_a,
                               self.limits.du_air,
                               self.limits.mdot_a_min, self.limits.mdot_a_max)
        u = ControlInput(mdot_b=float(coolant[0]), mdot_c=float(coolant[1]),
                         mdot_a=air)
        self._u_prev = u
        return ControllerOutput(u=u, lower_layer_active=self._latched,
                                diagnostics=diags)


class SingleMpcController:
    """Upper layer only; the air split never moves from the default."""

    name = "single_mpc"

    def __init__(self, upper_cfg: UpperMpcConfig, params: PlantParams,
                 law: HeatPumpLaw, limits: ActuatorLimits,
                 air_total: float = 0.16):
        self.upper = UpperMpc(upper_cfg, params, law, limits)
        self.limits = limits
        self.default_air = default_air_split(limits, air_total)
        self._u_prev: ControlInput | None = None

    @property
    def u_prev(self) -> ControlInput:
        if self._u_prev is None:
            return ControlInput(mdot_b=self.limits.mdot_b_min,
                                mdot_c=self.limits.mdot_c_min,
                                mdot_a=self.default_air.copy())
        return self._u_prev

    def step(self, state: PlantState, t: float, sig: StepSignals) -> ControllerOutput:
        u_prev = self.u_prev
        coolant, res_up = self.upper.step(
            state, np.array([u_prev.mdot_b, u_prev.mdot_c]), sig,
            u_prev.mdot_a_total)
        u = ControlInput(mdot_b=float(coolant[0]), mdot_c=float(coolant[1]),
                         mdot_a=self.default_air.copy())
        self._u_prev = u
        return ControllerOutput(
            u=u, lower_layer_active=False,
            diagnostics={"upper_cost": res_up.cost,
                         "upper_iterations": res_up.iterations})


class RuleBasedController:
    """Battery-first thermostat rule with a passenger boost window.

    Coolant targets follow the battery-temperature predicate; the air split
    stays at the constant default until a boarding is detected, then every
    section is served harder for the boost duration with the boarded
    section getting the largest flow.  All transitions are rate-limited so
    the applied outputs respect the same actuator limits the optimizing
    controllers obey.
    """

    name = "rule_based"

    def __init__(self, cfg: RuleConfig, limits: ActuatorLimits):
        self.cfg = cfg
        self.limits = limits
        self.default_air = default_air_split(limits, cfg.air_default_total)
        self._boost_until = -np.inf
        self._boost_section: int | None = None
        self._u_prev: ControlInput | None = None

    def coolant_target(self, t_bat: float) -> tuple[float, float]:
        if t_bat < self.cfg.t_bound_min:
            return self.cfg.mdot_battery_phase
        return self.cfg.mdot_cabin_phase

    def air_target(self, t: float, passenger_section: Optional[int]) -> np.ndarray:
        if passenger_section is not None:
            self._boost_section = passenger_section
            self._boost_until = t + self.cfg.boost_duration
        if self._boost_section is not None and t < self._boost_until:
            air = np.full(4, self.cfg.boost_other_flow)
            air[self._boost_section - 1] = self.cfg.boost_section_flow
            return air
        return self.default_air.copy()

    def step(self, state: PlantState, t: float, sig: StepSignals) -> ControllerOutput:
        mdot_b_t, mdot_c_t = self.coolant_target(state.t_bat)
        air_t = self.air_target(t, sig.passenger_section)
        if self._u_prev is None:
            u = ControlInput(mdot_b=mdot_b_t, mdot_c=mdot_c_t, mdot_a=air_t)
        else:
            prev = self._u_prev
            du = self.limits.du_coolant
            mdot_b = float(_ramp_toward(np.array([mdot_b_t]),
                                        np.array([prev.mdot_b]), du,
                                        self.limits.mdot_b_min,
                                        self.limits.mdot_b_max)[0])
            mdot_c = float(_ramp_toward(np.array([mdot_c_t]),
                                        np.array([prev.mdot_c]), du,
                                        self.limits.mdot_c_min,
                                        self.limits.mdot_c_max)[0])
            air = _ramp_toward(air_t, prev.mdot_a, self.limits.du_air,
                               self.limits.mdot_a_min, self.limits.mdot_a_max)
            u = ControlInput(mdot_b=mdot_b, mdot_c=mdot_c, mdot_a=air)
        self._u_prev = u
        return ControllerOutput(
            u=u, lower_layer_active=False,
            diagnostics={"battery_phase": state.t_bat < self.cfg.t_bound_min,
                         "boost_active": bool(self._boost_section is not None
                                              and t < self._boost_until)})


def make_controller(name: str, params: PlantParams, law: HeatPumpLaw,
                    limits: ActuatorLimits, upper_cfg: UpperMpcConfig,
                    lower_cfg: LowerMpcConfig, rule_cfg: RuleConfig,
                    air_total: float = 0.16):
    if name == "hierarchical":
        return HierarchicalController(upper_cfg, lower_cfg, params, law,
                                      limits, air_total)
    if name == "single_mpc":
        return SingleMpcController(upper_cfg, params, law, limits, air_total)
    if name == "rule_based":
        return RuleBasedController(rule_cfg, limits)
    raise DomainError("controller", f"unknown name {name!r}; "
                      f"expected one of {CONTROLLER_NAMES}")
