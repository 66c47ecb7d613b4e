"""Exception hierarchy shared by every stage of the pipeline."""


class ViewPlanError(Exception):
    pass


class IoError(ViewPlanError):
    pass


# mesh
class UnreadableFile(IoError):
    pass


class ParseError(ViewPlanError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyMesh(ViewPlanError):
    pass


class SubdivisionOverflow(ViewPlanError):
    pass


# spectral
class DegenerateSubset(ViewPlanError):
    pass


class ZeroDegreeRow(ViewPlanError):
    pass


class EigenFailure(ViewPlanError):
    pass


# viewgen
class DegenerateNormal(ViewPlanError):
    pass


class CancelledField(ViewPlanError):
    pass


class CorrectionFailed(ViewPlanError):
    pass


# solver
class InstanceInfeasible(ViewPlanError):
    def __init__(self, message, uncoverable=()):
        self.uncoverable = list(uncoverable)
        super().__init__(message)


class TooLarge(ViewPlanError):
    pass


# planner
class NoProgress(ViewPlanError):
    pass


class SamplingStarved(ViewPlanError):
    pass


class ConfigError(ViewPlanError):
    pass
