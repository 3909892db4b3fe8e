"""Exception types shared across the simulator, optimizer and CLI."""


class EvthermError(Exception):
    """Base class for all package errors."""


class DomainError(EvthermError, ValueError):
    """An input value is outside its physical or numerical domain."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DegenerateFlowError(EvthermError):
    """Total coolant flow is zero; the loop model is undefined."""


class DepletionError(EvthermError):
    """Battery state of charge would cross zero during a step."""

    def __init__(self, t_depleted: float):
        self.t_depleted = t_depleted
        super().__init__(f"battery depleted at t = {t_depleted:.1f} s")


class DivergenceError(EvthermError):
    """A simulated temperature left the sanity band."""

    def __init__(self, field: str, value: float, step_index: int | None = None):
        self.field = field
        self.value = value
        self.step_index = step_index
        where = f" at step {step_index}" if step_index is not None else ""
        super().__init__(f"{field} = {value!r} outside sanity band{where}")

    def with_step(self, step_index: int) -> "DivergenceError":
        return DivergenceError(self.field, self.value, step_index)


class NumericalBlowupError(EvthermError):
    """A rollout produced a non-finite cost."""

    def __init__(self, step_index: int):
        self.step_index = step_index
        super().__init__(f"non-finite cost at rollout step {step_index}")


class InfeasibleError(EvthermError):
    """Box and rate constraints admit no feasible input."""


class ConfigError(EvthermError):
    """A configuration file or override could not be interpreted."""
