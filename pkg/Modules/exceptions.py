#coding:utf-8
"""Error types shared by the quantum-memory toolkit."""


class QuantumMemoryError(Exception):
    """Base class for every error raised by the toolkit."""


class DimensionError(QuantumMemoryError, ValueError):
    pass


class ModelValidationError(QuantumMemoryError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ConfigError(QuantumMemoryError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class StabilityError(QuantumMemoryError, ArithmeticError):
    pass


class DegenerateScaleError(QuantumMemoryError, ArithmeticError):
    pass


class HorizonError(QuantumMemoryError, ArithmeticError):
    """Discount horizon outside the admissible range (0, max_horizon)."""

    def __init__(self, horizon, max_horizon):
        self.horizon = horizon
        self.max_horizon = max_horizon
        super().__init__(f"horizon T={horizon:g} is not admissible (maximal admissible T={max_horizon:g})")


class RegularityError(QuantumMemoryError, ArithmeticError):
    def __init__(self, epsilon, derivative):
        self.epsilon = epsilon
        self.derivative = derivative
        super().__init__(f"fidelity level eps={epsilon:g} is not regular (derivative at tau = {derivative:.3e})")


class ConvergenceError(QuantumMemoryError, ArithmeticError):
    pass


# reported by the command line with exit code 2
VALIDATION_ERRORS = (ModelValidationError, ConfigError, DimensionError, DegenerateScaleError)
