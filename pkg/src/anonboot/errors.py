"""Exception hierarchy shared across the package."""


class AnonBootError(Exception):
    """Base class for all protocol and simulator errors."""


class WireError(AnonBootError):
    """Base class for message encoding/decoding errors."""


class InvalidField(WireError):
    """A message field violates its type invariant."""


class NotAnonBoot(WireError):
    """Script is not an AnonBoot payload (wrong opcode or magic); skip it."""


class UnsupportedVersion(WireError):
    """Payload carries a protocol version this implementation cannot parse."""


class UnknownType(WireError):
    """Payload carries an unknown message type code."""


class LengthMismatch(WireError):
    """Payload length does not match the declared message type."""


class UnknownScheme(AnonBootError):
    """Proof-of-work scheme identifier is not registered."""


class BudgetExhausted(AnonBootError):
    """Proof-of-work search hit its attempt cap without a solution."""


class OutOfRange(AnonBootError):
    """Block height outside the stored chain."""


class ForkDetected(AnonBootError):
    """Host chain signalled a fork; in-progress pulse state must be discarded."""


class ConfigError(AnonBootError):
    """Invalid protocol or chain configuration."""


class SpawnBlockMissing(AnonBootError):
    """The pulse has not concluded: its spawn block is not on the chain yet."""


class Exhausted(AnonBootError):
    """Not enough reachable eligible peers to satisfy a selection."""


class StaleInstanceError(AnonBootError):
    """Service instance TTL expired before bootstrap."""
