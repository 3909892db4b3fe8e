"""Closed-loop simulation: plant at a fixed step, controller under ZOH.

The plant advances at ``dt`` (1 s by default) while the controller is
sampled every ``dt_ctrl`` seconds and its output held in between.  The
heat-pump thermostat acts at plant rate on the measured cabin temperature
(mass-weighted section mean) and the battery temperature.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import plant
from .controllers import StepSignals
from .errors import DivergenceError, DomainError
from .plant import (
    ActuatorLimits,
    ControlInput,
    DisturbanceInput,
    HeatPumpLaw,
    PlantParams,
    PlantState,
)
from .scenario import Scenario
from .trace import Trace


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1.0                 # plant step, s
    dt_ctrl: float = 5.0            # controller sample period, s
    soc0: float = 0.9
    init_temp: float | None = None  # None: cold-soaked at ambient(0)

    def __post_init__(self):
        if not (0.0 < self.dt <= 1.0):
            raise DomainError("dt", "must be in (0, 1] s")
        ratio = self.dt_ctrl / self.dt
        if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
            raise DomainError("dt_ctrl", "must be a positive multiple of dt")


def initial_state(scenario: Scenario, sim: SimConfig) -> PlantState:
    t0 = sim.init_temp if sim.init_temp is not None else scenario.ambient(0.0)
    return PlantState.uniform(t0, soc=sim.soc0)


def build_signals(scenario: Scenario, t: float) -> StepSignals:
    return StepSignals(
        door_signal=scenario.door_signal(t),
        passenger_section=scenario.passenger_signal(t),
        t_amb=scenario.ambient(t),
        q_occ=scenario.q_occ_total(t),
        q_sol=scenario.q_sol(t),
        p_trac=scenario.traction_power(t),
        q_add_fn=scenario.q_add,
    )


def simulate(scenario: Scenario, params: PlantParams, law: HeatPumpLaw,
             limits: ActuatorLimits, controller, sim: SimConfig | None = None) -> Trace:
    """Run one controller over the scenario and return the full trace.

    Controller outputs are validated against the actuator limits (boxes,
    pump cap and per-sample rate limits); a violation is a controller bug
    and raises immediately.
    """
    sim = sim or SimConfig()
    n_steps = int(round(scenario.duration / sim.dt))
    ctrl_every = int(round(sim.dt_ctrl / sim.dt))
    state = initial_state(scenario, sim)

    rows = []
    u: ControlInput | None = None
    u_prev_sample: ControlInput | None = None
    lower_active = False
    for i in range(n_steps + 1):
        t = i * sim.dt
        if i % ctrl_every == 0 and i < n_steps:
            out = controller.step(state, t, build_signals(scenario, t))
            limits.check(out.u, u_prev=u_prev_sample)
            u, lower_active = out.u, out.lower_layer_active
            u_prev_sample = out.u
        q_hp = float(law.command(params,
                                 plant.cabin_air_mean(state.t_s, params),
                                 state.t_bat))
        rows.append(_row(t, state, u, scenario.door_signal(t), lower_active, q_hp))
        if i == n_steps:
            break
        d = DisturbanceInput(
            t_amb=scenario.ambient(t),
            q_occ=scenario.q_occ_total(t),
            q_sol=scenario.q_sol(t),
            q_add=scenario.q_add(t, state.t_s),
            p_trac=scenario.traction_power(t),
        )
        try:
            state = plant.step(state, params, u, d, q_hp, sim.dt)
        except DivergenceError as err:
            raise err.with_step(i) from None
    return Trace.from_rows(rows)


def _row(t: float, state: PlantState, u: ControlInput, door: bool,
         lower_active: bool, q_hp: float) -> dict:
    return {
        "t": t,
        "t_c1": state.t_c1, "t_c2": state.t_c2, "t_c3": state.t_c3,
        "t_c4": state.t_c4, "t_ha": state.t_ha, "t_cab": state.t_cab,
        "t_cb": state.t_cb,
        "t_s1": state.t_s[0], "t_s2": state.t_s[1],
        "t_s3": state.t_s[2], "t_s4": state.t_s[3],
        "t_bat": state.t_bat, "soc": state.soc,
        "mdot_b": u.mdot_b, "mdot_c": u.mdot_c,
        "mdot_a1": u.mdot_a[0], "mdot_a2": u.mdot_a[1],
        "mdot_a3": u.mdot_a[2], "mdot_a4": u.mdot_a[3],
        "door_signal": float(door), "lower_active": float(lower_active),
        "q_hp": q_hp,
    }
