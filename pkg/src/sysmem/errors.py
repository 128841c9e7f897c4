"""Exception hierarchy.

The CLI maps the three top-level families onto exit codes:
``ParseError`` -> 2, ``ValidationError`` -> 3, anything else from
``SysMemError`` -> 4.
"""


class SysMemError(Exception):
    """Base class for every error raised by this package."""


class ParseError(SysMemError):
    """Input could not be read as the expected file format."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class ScriptError(ParseError):
    pass


class ValidationError(SysMemError, ValueError):
    """Input parsed fine but violates a domain invariant."""


class GapOrOverlap(ValidationError):
    pass


class RateOutOfRange(ValidationError):
    pass


class NonPositiveWidth(ValidationError):
    pass


class NonPositiveSpeed(ValidationError):
    pass


class NonPositiveParameter(ValidationError):
    pass


class CoverageMismatch(ValidationError):
    pass


class DegenerateCount(ValidationError):
    pass


class WrongGoal(ValidationError):
    pass


class UnequalWidths(ValidationError):
    pass


class SegmentationMismatch(ValidationError):
    pass


class TooManySegments(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class BadStep(ValidationError):
    pass


class BadCounts(ValidationError):
    pass


class DegenerateNull(ValidationError):
    pass


class OutOfOrderEvent(ValidationError):
    pass


class TraceDoesNotReachSign(ValidationError):
    pass


class FixtureError(SysMemError):
    pass


class MissingFixture(FixtureError):
    pass


class ChecksumMismatch(FixtureError):
    pass
