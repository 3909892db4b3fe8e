"""EV integrated thermal management: plant, controllers, benchmark harness."""

__version__ = "0.1.0"

from .plant import (
    ActuatorLimits,
    ControlInput,
    DisturbanceInput,
    HeatPumpLaw,
    PlantParams,
    PlantState,
)
from .scenario import DoorEvent, PassengerEvent, Scenario
from .simulate import SimConfig, simulate
from .trace import Trace

__all__ = [
    "ActuatorLimits",
    "ControlInput",
    "DisturbanceInput",
    "HeatPumpLaw",
    "PlantParams",
    "PlantState",
    "DoorEvent",
    "PassengerEvent",
    "Scenario",
    "SimConfig",
    "simulate",
    "Trace",
    "__version__",
]
