from typing import Optional


class SimulationError(Exception):
    # The coupled driver attaches the step index when a sub-step fails.
    message: str
    step: Optional[int]

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.step = step

    def at_step(self, step: int) -> 'SimulationError':
        self.step = step
        return self

    def __str__(self) -> str:
        if self.step is None:
            return self.message
        return f'step {self.step}: {self.message}'


class InvalidParameter(SimulationError):
    pass


class SingularSystem(SimulationError):
    pass


class ShapeMismatch(SimulationError):
    pass


class KernelMismatch(SimulationError):
    pass


class CFLViolation(SimulationError):
    ratio: float

    def __init__(self, message: str, ratio: float, step: Optional[int] = None):
        super().__init__(message, step)
        self.ratio = ratio


class SolverError(SimulationError):
    pass


class IncompleteDiagnostics(SimulationError):
    pass


class ConfigError(SimulationError):
    violations: list[str]

    def __init__(self, violations: list[str]):
        super().__init__('invalid configuration:\n  ' + '\n  '.join(violations))
        self.violations = violations


class OutputError(SimulationError):
    path: str

    def __init__(self, path: str, reason: str):
        super().__init__(f'{path}: {reason}')
        self.path = path
