"""Exception hierarchy.

Every failure the library signals is a ``ReciprosimError``; the CLI maps the
two families (config vs runtime) onto exit codes.
"""

from __future__ import annotations


class ReciprosimError(Exception):
    """Base class for all library errors."""


class ConfigError(ReciprosimError):
    """Configuration could not be parsed or is invalid."""


class ConfigParseError(ConfigError):
    def __init__(self, line: int, column: int, reason: str) -> None:
        self.line = line
        self.column = column
        self.reason = reason
        super().__init__(f"line {line}, column {column}: {reason}")


class ValidationError(ConfigError):
    """Carries every violated constraint, not just the first."""

    def __init__(self, problems: list[str]) -> None:
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ConfigInvalid(ConfigError):
    pass


class UnknownKind(ConfigError):
    pass


class OverrideRejected(ConfigError):
    pass


class LogError(ReciprosimError):
    """Problems with an event log's structure or content."""


class OrderViolation(LogError):
    pass


class SchemaViolation(LogError):
    pass


class ParseError(LogError):
    def __init__(self, line: int, reason: str) -> None:
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class DigestMismatch(LogError):
    pass


class ConservationViolation(LogError):
    pass


class AmountOverflow(LogError):
    pass


class SelfInteraction(ReciprosimError):
    pass


class HorizonExceeded(ReciprosimError):
    pass


class PairingMismatch(ReciprosimError):
    pass


class LogTooLarge(ReciprosimError):
    pass


class LengthMismatch(ReciprosimError):
    pass
