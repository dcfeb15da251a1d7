"""Exception hierarchy shared across the toolkit."""


class FalsifyKitError(Exception):
    """Base class for all toolkit errors."""


# -- feature space ----------------------------------------------------------

class InvalidDomain(FalsifyKitError):
    pass


class DanglingPath(FalsifyKitError):
    pass


class PointSpaceMismatch(FalsifyKitError):
    pass


class OutOfRange(FalsifyKitError):
    pass


class LengthMismatch(FalsifyKitError):
    pass


class RejectionBudgetExhausted(FalsifyKitError):
    """Raised after too many consecutive constraint/bound rejections."""


# -- MTL monitor ------------------------------------------------------------

class ParseError(FalsifyKitError):
    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class UnknownOperator(ParseError):
    pass


class UnknownSignal(FalsifyKitError):
    pass


class EmptyTrace(FalsifyKitError):
    pass


class IndexOutOfRange(FalsifyKitError):
    pass


# -- error table ------------------------------------------------------------

class DuplicateRunId(FalsifyKitError):
    pass


class InsufficientRows(FalsifyKitError):
    pass


class NoOrderedColumns(FalsifyKitError):
    pass


class NoUnorderedColumns(FalsifyKitError):
    pass


class EmptyTable(FalsifyKitError):
    pass


class SchemaMismatch(FalsifyKitError):
    pass


# -- samplers ---------------------------------------------------------------

class SingularKernel(FalsifyKitError):
    pass


# -- simulator / protocol ---------------------------------------------------

class SimulatorError(FalsifyKitError):
    def __init__(self, message, run_id=None):
        super().__init__(message)
        self.run_id = run_id


class ProtocolError(FalsifyKitError):
    pass


class FrameTooLarge(ProtocolError):
    pass


class MalformedJson(ProtocolError):
    pass


class UnknownType(ProtocolError):
    pass


class WireLengthMismatch(ProtocolError):
    pass


class HandshakeRefused(ProtocolError):
    pass


class ProtocolViolation(ProtocolError):
    pass


class ConnectionLost(ProtocolError):
    pass


class Timeout(ProtocolError):
    pass


class BindError(ProtocolError):
    pass


# File I/O errors are plain OSError.
IoError = OSError


# -- cli --------------------------------------------------------------------

class ConfigInvalid(FalsifyKitError):
    def __init__(self, message, field=None):
        if field is not None:
            message = f"config field '{field}': {message}"
        super().__init__(message)
        self.field = field
