"""Proxy wrapping for legacy byte-in/byte-out services.

A legacy handler knows nothing about the registry's request objects. The
proxy built by :func:`wrap_legacy` accepts a :class:`ServiceRequest`, frames
its payload into the legacy call shape, calls the handler and unframes the
reply, so the old service can be registered and invoked like a native one.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable

from fograph.errors import FogError, ShapeUnsupported
from fograph.registry import MigrationState, ServiceDescriptor

Handler = Callable[[bytes], bytes]


class CallShape(str, Enum):
    LEGACY_V0 = "legacy_v0"


@dataclass(frozen=True)
class LegacyService:
    legacy_id: str
    handler: Handler
    call_shape: CallShape | str = CallShape.LEGACY_V0


@dataclass(frozen=True)
class ServiceRequest:
    service_id: str
    payload: bytes


@dataclass(frozen=True)
class ServiceResponse:
    service_id: str
    payload: bytes


# LegacyV0 frames are the raw request/reply bytes; encode/decode exist so a
# future shape only has to supply a different pair.
def _v0_encode(payload: bytes) -> bytes:
    return bytes(payload)


def _v0_decode(reply: bytes) -> bytes:
    if not isinstance(reply, (bytes, bytearray)):
        raise FogError(f"legacy handler returned {type(reply).__name__}, expected bytes")
    return bytes(reply)


_CODECS = {CallShape.LEGACY_V0: (_v0_encode, _v0_decode)}


class LegacyProxy:
    """Callable adapter: ``ServiceRequest -> ServiceResponse``."""

    def __init__(self, legacy: LegacyService) -> None:
        try:
            shape = CallShape(legacy.call_shape)
        except ValueError:
            raise ShapeUnsupported(f"call shape {legacy.call_shape!r} is not supported") from None
        if not callable(legacy.handler):
            raise FogError(f"legacy service {legacy.legacy_id!r} has no handler")
        self.legacy = legacy
        self._encode, self._decode = _CODECS[shape]
        self.calls = 0

    def __call__(self, request: ServiceRequest) -> ServiceResponse:
        self.calls += 1
        reply = self.legacy.handler(self._encode(request.payload))
        return ServiceResponse(request.service_id, self._decode(reply))


def wrap_legacy(legacy: LegacyService, descriptor: ServiceDescriptor) -> ServiceDescriptor:
    """Return a registrable copy of ``descriptor`` backed by ``legacy``."""
    proxy = LegacyProxy(legacy)
    return dataclasses.replace(descriptor, migration_state=MigrationState.WRAPPED, endpoint=proxy)


# -- bundled legacy services -------------------------------------------------

def _format_number(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def calculating_handler(request: bytes) -> bytes:
    """Old-style calculator: ``b"add 2 3"`` -> ``b"5"``.

    Operands are integers or ``p/q`` fractions; results are exact. Malformed
    input yields an ``ERR ...`` reply instead of raising, as the original did.
    """
    try:
        op, *args = request.decode("ascii").split()
        nums = [Fraction(a) for a in args]
    except (UnicodeDecodeError, ValueError, ZeroDivisionError):
        return b"ERR malformed request"
    if len(nums) != 2:
        return b"ERR expected two operands"
    a, b = nums
    if op == "add":
        out = a + b
    elif op == "sub":
        out = a - b
    elif op == "mul":
        out = a * b
    elif op == "div":
        if b == 0:
            return b"ERR division by zero"
        out = a / b
    else:
        return b"ERR unknown operation " + op.encode("ascii", "replace")
    return _format_number(out).encode("ascii")


def editor_handler(request: bytes) -> bytes:
    """Old-style text editor service: ``<command> <text>``.

    Commands: ``upper``, ``lower``, ``reverse``, ``strip``. Unknown commands
    echo the text unchanged.
    """
    command, _, text = request.partition(b" ")
    if command == b"upper":
        return text.upper()
    if command == b"lower":
        return text.lower()
    if command == b"reverse":
        return text[::-1]
    if command == b"strip":
        return text.strip()
    return text


def echo_handler(request: bytes) -> bytes:
    return bytes(request)


CALCULATING_SERVICE = LegacyService("legacy-calculating-service", calculating_handler)
EDITOR_SERVICE = LegacyService("legacy-editor-service", editor_handler)


def encode_calc(op: str, a: int | Fraction, b: int | Fraction) -> bytes:
    return f"{op} {a} {b}".encode("ascii")
