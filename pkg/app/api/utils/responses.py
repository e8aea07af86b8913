class DomainRangeError(Exception):
    """Raised when an angle or parameter lies outside its valid domain."""

    def __init__(self, message="Value is outside of its valid range.", status_code=400, exit_code=1):
        self.message = message
        self.status_code = status_code
        self.exit_code = exit_code
        super().__init__(self.message)


class AllocationInputError(Exception):
    def __init__(self, message="Allocation inputs must be finite numbers.", status_code=400, exit_code=1):
        self.message = message
        self.status_code = status_code
        self.exit_code = exit_code
        super().__init__(self.message)


class AllocationSaturationError(Exception):
    """Carries the floored differential-tilt denominator and the clamped command."""

    def __init__(
        self,
        message="Differential tilt denominator hit its floor.",
        floored_value=None,
        command=None,
        status_code=422,
        exit_code=1,
    ):
        self.message = message
        self.floored_value = floored_value
        self.command = command
        self.status_code = status_code
        self.exit_code = exit_code
        super().__init__(self.message)


class SimulationDivergenceError(Exception):
    def __init__(self, message="Simulation diverged.", log=None, status_code=500, exit_code=2):
        self.message = message
        self.log = log
        self.status_code = status_code
        self.exit_code = exit_code
        super().__init__(self.message)


class FitNotConvergedError(Exception):
    def __init__(self, message="Least-squares fit did not converge.", result=None, status_code=500, exit_code=3):
        self.message = message
        self.result = result
        self.status_code = status_code
        self.exit_code = exit_code
        super().__init__(self.message)


class IllConditionedFitError(Exception):
    def __init__(
        self,
        message="Polynomial fit is ill-conditioned. Rescale chi (e.g. fit over chi - pi/4) or add samples.",
        status_code=400,
        exit_code=3,
    ):
        self.message = message
        self.status_code = status_code
        self.exit_code = exit_code
        super().__init__(self.message)


class ScenarioFileError(Exception):
    def __init__(self, message="Scenario file cannot be read.", status_code=400, exit_code=1):
        self.message = message
        self.status_code = status_code
        self.exit_code = exit_code
        super().__init__(self.message)


class PlotNotSavedError(Exception):
    def __init__(self, message="Plot cannot be saved.", status_code=500, exit_code=1):
        self.message = message
        self.status_code = status_code
        self.exit_code = exit_code
        super().__init__(self.message)
