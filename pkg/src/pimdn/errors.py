"""Exception types shared across the toolkit."""


class PimdnError(Exception):
    """Base class for all toolkit errors."""


class InvalidInput(PimdnError):
    """A caller-supplied value is malformed (non-finite, wrong shape, ...)."""


class InvalidConfig(PimdnError):
    """A configuration value is out of its legal range or inconsistent."""


class EmptyBatch(PimdnError):
    """A loss was requested on a batch with no records."""


class MissingLabel(PimdnError):
    """Class-informed training was requested on records without labels."""


class NonFiniteValue(PimdnError):
    """A tape operation hit a domain violation (log of non-positive,
    division by zero).  Carries the index of the offending node."""

    def __init__(self, message: str, node_index: int):
        super().__init__(f"{message} (node {node_index})")
        self.node_index = node_index


class NonFiniteGradient(PimdnError):
    """Training produced a NaN/inf gradient.  Carries the iteration index."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class SimulationDiverged(PimdnError):
    """A time integration left the finite range.  Carries the step index."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class UnstableTimestep(PimdnError):
    """Explicit time step violates the stability bound."""


class GridTooNarrow(PimdnError):
    """A density grid truncates non-negligible probability mass."""


class GridMismatch(PimdnError):
    """Two curves were compared on different grids."""


class SamplerDiverged(PimdnError):
    """ODE sampling produced a non-finite trajectory."""


class ParseError(PimdnError):
    """A data file is malformed.  Carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
