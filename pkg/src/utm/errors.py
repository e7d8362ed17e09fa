"""Exception types raised across the package."""


class UTMError(Exception):
    """Base class for all package errors."""


class InvalidSymbol(UTMError):
    pass


class NonzeroRemainder(UTMError):
    pass


class RootFindingFailed(UTMError):
    pass


class SchemaError(UTMError):
    pass


class CountMismatch(UTMError):
    pass


class GridTooCoarse(UTMError):
    pass


class NearSingular(UTMError):
    def __init__(self, k, ratio=None):
        self.k = k
        self.ratio = ratio
        msg = f"system nearly singular at k={k!r}"
        if ratio is not None:
            msg += f" (normalized |det|={ratio:.3e})"
        super().__init__(msg)


class TraceStalled(UTMError):
    pass


class ZeroTooCloseToCorner(UTMError):
    pass


class BoxBoundaryZero(UTMError):
    pass


class IllPosedProblem(UTMError):
    pass


class TailNotConverged(UTMError):
    pass


class WrongProblemClass(UTMError):
    pass


class NonSimpleZero(UTMError):
    pass


class UnstableDiscretization(UTMError):
    pass
