"""Exception hierarchy shared across the package.

Each leaf class maps onto one CLI exit code so scripted callers can
distinguish failure modes without parsing stderr.
"""


class OmnisrError(Exception):
    """Base class for all package-level errors."""

    exit_code = 1


class ConfigError(OmnisrError):
    """Invalid configuration: bad shapes, unknown keys, out-of-range values."""

    exit_code = 2


class DomainError(OmnisrError):
    """Input outside the mathematical domain of an operation."""

    exit_code = 2


class BehindPlaneError(DomainError):
    """Sphere point at or behind a tangent plane's great circle."""


class CoverageError(OmnisrError):
    """A sphere point is not covered by any tangent plane in the layout."""

    exit_code = 5


class FileFormatError(OmnisrError):
    """Malformed image or tensor file."""

    exit_code = 3


class WireError(OmnisrError):
    """Base for external-denoiser wire protocol failures."""

    exit_code = 4


class ConnectionFailure(WireError):
    """Endpoint unreachable or transport broken mid-session."""


class ProtocolError(WireError):
    """Malformed frame, bad magic, or unexpected opcode."""


class VersionMismatch(WireError):
    """Peer negotiated an unsupported protocol version."""


class ShapeMismatch(WireError):
    """Response tensor shape does not match the session's declared shape."""


class InvariantFailure(OmnisrError):
    """A self-test invariant did not hold."""

    exit_code = 5
