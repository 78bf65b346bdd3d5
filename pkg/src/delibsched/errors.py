class DelibError(Exception):
    """Base class for every error raised by delibsched."""


class ResolutionError(DelibError, KeyError):
    """A schedule step names a rule id that is not in the rule set."""

    def __str__(self) -> str:
        # KeyError quotes its argument; keep the message readable.
        return str(self.args[0]) if self.args else ""


class ParameterError(DelibError, ValueError):
    """A parameter is outside its permitted range."""


class RegimeError(DelibError):
    """An optimizer or evaluator was called outside its deadline regime."""


class OracleCapError(DelibError):
    """The brute-force oracle refused an instance above its size cap."""


class FormatError(DelibError):
    """A rule, pmf or config file could not be parsed."""
