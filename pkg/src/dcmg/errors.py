"""Exception hierarchy shared by every module."""


class MicrogridError(Exception):
    """Base class for all errors raised by dcmg."""


class SingularBlock(MicrogridError):
    def __init__(self, block, rcond=None):
        self.block = block
        self.rcond = rcond
        msg = f"block {block} is numerically singular"
        if rcond is not None:
            msg += f" (rcond={rcond:.3g})"
        super().__init__(msg)


class SingularSystem(MicrogridError):
    pass


class AssumptionViolation(MicrogridError):
    """Every bus must carry a load for the uniform controller."""


class DegenerateLoadProfile(MicrogridError):
    pass


class NonpositiveNu(MicrogridError):
    pass


class ModelValidationError(MicrogridError):
    pass


class DanglingReference(ModelValidationError):
    """A node or line id that does not exist."""


class NonpositiveParameter(ModelValidationError):
    pass


class GraphNotConnected(ModelValidationError):
    pass


class ScenarioSchemaError(MicrogridError):
    def __init__(self, msg, path=(), line=None):
        self.path = tuple(path)
        self.line = line
        where = "/".join(str(p) for p in self.path) or "<root>"
        loc = f"line {line}, " if line is not None else ""
        super().__init__(f"{loc}field {where}: {msg}")


class SimulationError(MicrogridError):
    """Runtime failure annotated with the simulated time it happened at."""

    def __init__(self, msg, t=None):
        self.t = t
        if t is not None:
            msg = f"t={t:.6g}s: {msg}"
        super().__init__(msg)


class DisconnectedGraph(SimulationError):
    pass


class NonpositiveReference(SimulationError):
    """A reference current came out nonpositive; omega is too small."""


class NumericalBlowup(SimulationError):
    pass


class NotSettled(SimulationError):
    pass
