"""Error taxonomy shared by the registry, routers, executor, parsers, and service.

Every error carries a stable machine-readable ``code`` so the HTTP layer and
the CLI can map failures without string matching.
"""

from __future__ import annotations


class RouterError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class ValidationError(RouterError):
    code = "validation_error"


class DuplicateExpertError(ValidationError):
    code = "duplicate_expert"


class ExpertNotFoundError(RouterError):
    code = "expert_not_found"


class EmptyPoolError(RouterError):
    code = "empty_pool"


class DimensionMismatchError(ValidationError):
    code = "dimension_mismatch"


class CacheInvalidError(RouterError):
    code = "cache_invalid"


class TransportError(RouterError):
    code = "transport_error"


class RoutingTransportError(TransportError):
    code = "routing_transport"


class DispatchTransportError(TransportError):
    code = "dispatch_transport"


class ProtocolError(RouterError):
    code = "protocol_error"


class UnparsableResponseError(RouterError):
    """The LM reply contained no in-range expert index."""

    code = "unparsable_response"


class RoutingFailedError(RouterError):
    """Routing gave up after the configured retries."""

    code = "routing_failed"


class NoExpertSelectedError(RouterError):
    """Routing abstained or failed, so execution was refused."""

    code = "no_expert_selected"


class BudgetExceededError(RouterError):
    code = "budget_exceeded"


class ParseError(RouterError):
    """Malformed input file.

    ``line`` is 1-based for line-oriented formats; ``offset`` is a byte
    offset for s-expression documents. Either may be None.
    """

    code = "parse_error"

    def __init__(self, message: str, *, line: int | None = None, offset: int | None = None):
        super().__init__(message)
        self.line = line
        self.offset = offset


class SchemaError(ParseError):
    """Structurally valid input missing required fields."""

    code = "schema_error"


class ExtractionError(RouterError):
    """A well-formed document carried no extractable task text."""

    code = "extraction_error"


class ConfigError(RouterError):
    code = "config_error"
