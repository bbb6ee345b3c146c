"""Exception hierarchy shared by all coho1 modules."""


class Coho1Error(Exception):
    """Base class for every error raised by the package."""


class OutsideLocus(Coho1Error):
    pass


class Degenerate(Coho1Error):
    """Raised when an operation needs d1, d2 >= 2."""


class WrongPoint(Coho1Error):
    pass


class StepUnderflow(Coho1Error):
    pass


class MaxStepsExceeded(Coho1Error):
    pass


class LeftLocus(Coho1Error):
    pass


class Unreachable(Coho1Error):
    pass


class NotInLocus(Coho1Error):
    pass


class NoConvergence(Coho1Error):
    pass


class IncompleteCurve(Coho1Error):
    pass


class OriginVertex(Coho1Error):
    pass


class AmbiguousUnwrap(Coho1Error):
    pass


class NonConvergentLimit(Coho1Error):
    pass


class CheckpointFailed(Coho1Error):
    def __init__(self, record):
        super().__init__(f"checkpoint {record.name!r} failed: "
                         f"computed {record.computed!r} vs bound {record.bound!r}")
        self.record = record


class NoMargin(Coho1Error):
    pass


class RefinementDiverged(Coho1Error):
    pass


class NotHeteroclinic(Coho1Error):
    pass


class ConfigError(Coho1Error):
    pass
