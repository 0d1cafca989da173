"""Exception taxonomy shared across the package."""


class BridgeRecError(Exception):
    """Base class for all package-specific errors."""


class ContractError(BridgeRecError):
    """A documented precondition was violated by the caller."""


class DimensionError(ContractError):
    """Operand shapes are incompatible."""


class DomainError(ContractError):
    """A scalar argument is outside its documented domain."""


class OrderingError(ContractError):
    """Reverse-time step asked to move forward in time (t > s)."""


class NumericError(BridgeRecError):
    """A computation produced non-finite values."""


class IngestError(BridgeRecError):
    """A data or embedding file failed to parse."""
