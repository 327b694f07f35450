"""Exception hierarchy shared by every module.

Each error carries a short machine-parsable ``code`` and the process exit
status the CLI uses when the error escapes a command.
"""

from __future__ import annotations


class ContentcastError(Exception):
    code = "internal"
    exit_status = 4


class ConfigError(ContentcastError, ValueError):
    code = "config"
    exit_status = 2


class IoError(ContentcastError, OSError):
    code = "io"
    exit_status = 3


# catalog
class UnknownObjectId(ConfigError):
    code = "unknown-object-id"


class EmptyRequest(ConfigError):
    code = "empty-request"


class NonPositiveHorizon(ConfigError):
    code = "non-positive-horizon"


class PlanExceedsBandwidth(ContentcastError):
    code = "plan-exceeds-bandwidth"


# pet
class BadPriority(ConfigError):
    code = "bad-priority"


class FieldLimit(ConfigError):
    code = "field-limit"


class Infeasible(ContentcastError):
    code = "infeasible"


class CorruptPacket(ContentcastError, ValueError):
    code = "corrupt-packet"
    exit_status = 2


class DuplicateIndex(ContentcastError, ValueError):
    code = "duplicate-index"
    exit_status = 2


class BadDistribution(ConfigError):
    code = "bad-distribution"


# workload
class ZeroItems(ConfigError):
    code = "zero-items"


class TooFewObjects(ConfigError):
    code = "too-few-objects"


# crowd
class MalformedMessage(ConfigError):
    code = "malformed-message"

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason
