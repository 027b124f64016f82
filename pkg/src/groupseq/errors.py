"""Exception hierarchy shared by all modules."""


class GroupSeqError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(GroupSeqError, ValueError):
    """Invalid user-facing configuration (CLI exit code 2)."""


# linalg
class NotPositiveDefinite(GroupSeqError, ValueError):
    pass


class DimensionMismatch(GroupSeqError, ValueError):
    pass


class SingularSchurComplement(GroupSeqError, ValueError):
    pass


class NoConvergence(GroupSeqError, RuntimeError):
    pass


# dataset
class ParseError(GroupSeqError, ValueError):
    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class SpecError(ConfigError):
    pass


class RankDeficientGroup(GroupSeqError, ValueError):
    def __init__(self, group):
        super().__init__(f"group {group!r} has a rank-deficient Gram matrix; retry with ridge > 0")
        self.group = group


class InvalidConfig(ConfigError):
    pass


# sequencer / glm
class SingularSystem(GroupSeqError, ValueError):
    pass


class NonpositiveCost(GroupSeqError, ValueError):
    pass


class PreconditionError(GroupSeqError, ValueError):
    """Input data does not satisfy an algorithm's preconditions (centering, whitening)."""


# metrics
class EmptyCurve(GroupSeqError, ValueError):
    pass


class InvalidStopCost(GroupSeqError, ValueError):
    pass


class ColumnMismatch(GroupSeqError, ValueError):
    pass


class LengthMismatch(GroupSeqError, ValueError):
    pass


class EmptyQuery(GroupSeqError, ValueError):
    pass


# theory
class TooManyGroups(ConfigError):
    pass
