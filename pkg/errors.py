"""Exception hierarchy for the fairdag toolkit.

Every module raises one of these so that the CLI can map failures to exit
codes in a single place. Value-shaped errors also subclass ``ValueError``
and lookup errors subclass ``KeyError``, so callers that only know the
builtins still catch them.
"""


class FairdagError(Exception):
    """Base class for every error raised by fairdag."""


class CycleError(FairdagError, ValueError):
    """The edge set admits a directed path from a node to itself."""


class UnknownNodeError(FairdagError, KeyError):
    """A node name or handle is not declared in the graph."""

    def __str__(self) -> str:
        # KeyError quotes its argument; keep messages readable
        return str(self.args[0]) if self.args else ""


class DuplicateError(FairdagError, ValueError):
    """A node name or an edge is declared twice."""


class OverlapError(FairdagError, ValueError):
    """A queried endpoint also appears in the conditioning set."""


class SizeCapError(FairdagError, ValueError):
    """A joint table would exceed the configured cell cap."""


class ZeroProbabilityEvidenceError(FairdagError, ValueError):
    """The conditioning event has zero probability."""


class ModelError(FairdagError, ValueError):
    """A CPT, domain or mechanism does not describe a valid model."""


class SingularConditioningError(FairdagError, ValueError):
    """The covariance block being conditioned on is singular."""


class EmptyGroupError(FairdagError, ValueError):
    """A group/stratum cell needed by a criterion has no samples."""


class InsufficientStrataError(FairdagError, ValueError):
    """No stratum carries enough data to test a conditional criterion."""


class DomainError(FairdagError, ValueError):
    """An intervention value lies outside the node's domain."""


class ParamError(FairdagError, ValueError):
    """Scenario parameters are invalid for the requested scenario."""


class DegenerateGroupError(FairdagError, ValueError):
    """A group's parameters make the reliability ratio undefined."""


class ConfigError(FairdagError, ValueError):
    """An environment override could not be parsed."""
