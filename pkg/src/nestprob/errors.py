"""Exception types raised across the package."""


class NestprobError(ValueError):
    """Base class for all domain errors."""


class NonPositiveWeight(NestprobError):
    pass


class WeightSumOutOfTolerance(NestprobError):
    pass


class SupportOutOfUnitCube(NestprobError):
    pass


class DimensionMismatch(NestprobError):
    pass


class NotOneLipschitz(NestprobError):
    pass


class EmptyAtom(NestprobError):
    pass


class NegativeA(NestprobError):
    pass


class ROutOfRange(NestprobError):
    pass


class NonPositiveR(NestprobError):
    pass


class FiltrationNotHStar(NestprobError):
    pass


class SearchSpaceTooLarge(NestprobError):
    pass


class RepresentationMismatch(NestprobError):
    pass


class UnboundedDerivativeDetected(NestprobError):
    pass


class CFLViolation(NestprobError):
    pass


class MeanOutOfGrid(NestprobError):
    pass
