"""Exception hierarchy shared by every bridgekit module."""


class BridgeKitError(Exception):
    """Base class for all bridgekit errors."""


class DimensionMismatch(BridgeKitError, ValueError):
    pass


class NotPositiveDefinite(BridgeKitError, ValueError):
    pass


class SingularSystem(BridgeKitError, ValueError):
    pass


class ConstantColumn(BridgeKitError, ValueError):
    def __init__(self, column: int):
        super().__init__(f"covariate column {column} has zero variance")
        self.column = column


class UnknownSetting(BridgeKitError, KeyError):
    pass


class DataIOError(BridgeKitError, OSError):
    pass


class ParseError(BridgeKitError, ValueError):
    def __init__(self, line: int, column: str, value: str):
        super().__init__(f"line {line}, column {column!r}: cannot parse {value!r} as a number")
        self.line = line
        self.column = column
        self.value = value


class WrongShape(BridgeKitError, ValueError):
    pass


class DegenerateCoefficient(BridgeKitError, ValueError):
    pass


class NoValidCandidate(BridgeKitError, RuntimeError):
    pass


class NonConvergence(BridgeKitError, RuntimeError):
    pass


class TooManyFailures(BridgeKitError, RuntimeError):
    pass
