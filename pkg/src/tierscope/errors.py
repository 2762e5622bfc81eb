"""Exception hierarchy shared by every module."""


class TierscopeError(Exception):
    """Base class for all errors raised by the package."""


class UnknownRuleKind(TierscopeError):
    pass


class ScaleOverflow(TierscopeError):
    pass


class UnknownTemplate(TierscopeError):
    pass


class SpecFormatError(TierscopeError):
    """A workflow, profile, query or table file could not be parsed."""


class InvalidTemplate(TierscopeError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class NoProfileData(TierscopeError):
    pass


class EmptyCandidateSet(TierscopeError):
    pass


class CapExceeded(TierscopeError):
    def __init__(self, size, cap):
        self.size = size
        self.cap = cap
        super().__init__(f"configuration space has {size} assignments, cap is {cap}")


class InconsistentStageSets(TierscopeError):
    pass


class TooFewRows(TierscopeError):
    pass


class DegenerateVariance(TierscopeError):
    pass


class NonPositiveMean(TierscopeError):
    pass


class InsufficientData(TierscopeError):
    pass


class LengthMismatch(TierscopeError):
    pass


class MissingScale(TierscopeError):
    pass
