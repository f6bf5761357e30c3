"""Exception hierarchy shared across the package."""


class VbmiError(Exception):
    """Base class for all package errors."""


class InvalidCodeError(VbmiError, ValueError):
    pass


class ConfigError(VbmiError, ValueError):
    pass


class ShapeError(VbmiError, ValueError):
    pass


class DesignError(VbmiError, ValueError):
    pass


class DomainError(VbmiError, ValueError):
    """Argument outside the mathematical domain of a metric."""


# protocol
class EncodeError(VbmiError, ValueError):
    pass


class CorruptPacketError(VbmiError):
    """CRC mismatch or malformed header; the frame is dropped."""


class NeedMoreData(VbmiError):
    """The buffer ends before a complete frame."""


# signal
class NotReadyError(VbmiError):
    """Requested window extends past the newest buffered sample."""


class GapError(VbmiError):
    """Requested window overlaps samples lost in transport."""


class OverwrittenError(VbmiError):
    """Requested window has already been overwritten in the ring buffer."""


# decoder
class InsufficientDataError(VbmiError, ValueError):
    pass


class NumericalError(VbmiError, ArithmeticError):
    pass


class RankDeficientReferenceError(VbmiError, ValueError):
    pass


class EmptyInputError(VbmiError, ValueError):
    pass


# backend
class FormatError(VbmiError, ValueError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class CorruptRecordError(VbmiError):
    """A stored blob failed its checksum and is never served."""


# harness
class WearError(VbmiError):
    """Electrode contact check failed at session start."""

    def __init__(self, report):
        self.report = report
        poor = [ch for ch, state in report.items() if state == "Poor"]
        super().__init__(f"poor electrode contact on: {', '.join(poor)}")
        self.poor_channels = poor


class CalibrationError(VbmiError):
    pass
