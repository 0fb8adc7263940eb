"""Exception hierarchy shared across the fograph modules."""

from __future__ import annotations


class FogError(Exception):
    """Base class for every error raised by fograph."""


class UnknownNode(FogError, KeyError):
    def __init__(self, node_id: str) -> None:
        super().__init__(node_id)
        self.node_id = node_id

    def __str__(self) -> str:
        return f"unknown node {self.node_id!r}"


class DuplicateRegistration(FogError):
    pass


class ConstraintViolation(FogError):
    pass


class NotFound(FogError, LookupError):
    pass


class NoEligibleNode(NotFound):
    pass


class NoMeasurements(FogError):
    pass


class UnknownRegistration(FogError, KeyError):
    pass


class ShapeUnsupported(FogError):
    pass


class NegativeRt(FogError, ValueError):
    pass


class InvalidPolicy(FogError, ValueError):
    pass


class Unreachable(FogError):
    pass


class InvalidInterval(FogError, ValueError):
    pass


class UnknownSensor(FogError, KeyError):
    pass


class EmptySeries(FogError):
    pass


class SchemaError(FogError):
    """Scenario or topology configuration failed validation.

    ``diagnostics`` holds one human-readable line per problem found.
    """

    def __init__(self, message: str, diagnostics: list[str] | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics if diagnostics is not None else [message]


class DisconnectedGraph(SchemaError):
    pass
