"""Bit-exact encoding and decoding of protocol messages as OP_RETURN payloads.

Peer advertisement payload (80 bytes):

    offset  size  field
    0       2     magic "AB"
    2       1     version
    3       1     msg_type (high nibble) | reserved nibble
    4       1     D flag (bit 7) | IP flag (bit 6) | 6 reserved bits
    5       33    connector public key (compressed point)
    38      16    network address (IPv4-mapped when the IP flag is clear)
    54      2     TCP port, big-endian
    56      2     service id, big-endian
    58      14    capability vector
    72      8     PoW nonce

Service request payload (28 bytes):

    offset  size  field
    0       4     header (as above)
    4       2     service id, big-endian
    6       14    capability vector (bytes 0-1 big-endian = committee size k)
    20      8     user entropy nonce

Scripts are OP_RETURN (0x6a) + OP_PUSHDATA1 (0x4c) + length + payload, so the
full scripts are 83 and 31 bytes. All multi-byte integers are big-endian.
"""

from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass, field

from .errors import (
    InvalidField,
    LengthMismatch,
    NotAnonBoot,
    UnknownType,
    UnsupportedVersion,
)

MAGIC = b"AB"
VERSION = 1

MSG_TYPE_PEER_AD = 1
MSG_TYPE_SERVICE_REQUEST = 2

OP_RETURN = 0x6A
OP_PUSHDATA1 = 0x4C

PUBKEY_LEN = 33
ADDRESS_LEN = 16
CAPABILITIES_LEN = 14
NONCE_LEN = 8

AD_PAYLOAD_LEN = 80
REQUEST_PAYLOAD_LEN = 28
MAX_OP_RETURN_PAYLOAD = 80

_AD_STRUCT = struct.Struct(">2sBBB33s16sHH14s8s")
_REQUEST_STRUCT = struct.Struct(">2sBBH14s8s")


@dataclass(frozen=True)
class AnonBootHeader:
    """Common 4-byte message header."""

    msg_type: int
    version: int = VERSION
    reserved_nibble: int = 0
    magic: bytes = MAGIC

    def validate(self) -> None:
        if self.magic != MAGIC:
            raise InvalidField(f"bad magic {self.magic!r}")
        if self.version != VERSION:
            raise InvalidField(f"unsupported version {self.version}")
        if self.msg_type not in (MSG_TYPE_PEER_AD, MSG_TYPE_SERVICE_REQUEST):
            raise InvalidField(f"unknown message type {self.msg_type}")
        if not 0 <= self.reserved_nibble <= 0x0F:
            raise InvalidField("reserved nibble out of range")


@dataclass(frozen=True)
class PeerAdvertisement:
    """A privacy peer's on-chain self-advertisement."""

    connector_pubkey: bytes
    address: bytes
    port: int
    service_id: int
    capabilities: bytes
    nonce: bytes
    flag_direct: bool = False
    flag_ipv6: bool = False
    reserved_flags: int = 0
    header: AnonBootHeader = field(
        default_factory=lambda: AnonBootHeader(MSG_TYPE_PEER_AD)
    )

    def validate(self) -> None:
        self.header.validate()
        if self.header.msg_type != MSG_TYPE_PEER_AD:
            raise InvalidField("advertisement header must have msg_type 1")
        if len(self.connector_pubkey) != PUBKEY_LEN:
            raise InvalidField("connector pubkey must be 33 bytes")
        if self.connector_pubkey[0] not in (0x02, 0x03):
            raise InvalidField(
                f"pubkey prefix {self.connector_pubkey[0]:#04x} is not a "
                "compressed point"
            )
        if len(self.address) != ADDRESS_LEN:
            raise InvalidField("address must be 16 bytes")
        if not self.flag_ipv6 and not _is_ipv4_mapped(self.address):
            raise InvalidField("IPv4 address must use the IPv4-mapped form")
        if not 0 <= self.port <= 0xFFFF:
            raise InvalidField("port out of range")
        if not 0 <= self.service_id <= 0xFFFF:
            raise InvalidField("service id out of range")
        if len(self.capabilities) != CAPABILITIES_LEN:
            raise InvalidField("capabilities must be 14 bytes")
        if len(self.nonce) != NONCE_LEN:
            raise InvalidField("nonce must be 8 bytes")
        if not 0 <= self.reserved_flags <= 0x3F:
            raise InvalidField("reserved flags out of range (6 bits)")

    @property
    def host(self) -> str:
        """Human-readable address string."""
        return decode_address(self.address, self.flag_ipv6)


@dataclass(frozen=True)
class ServiceRequest:
    """A user's on-chain request to bootstrap a service."""

    service_id: int
    capabilities: bytes
    nonce: bytes
    header: AnonBootHeader = field(
        default_factory=lambda: AnonBootHeader(MSG_TYPE_SERVICE_REQUEST)
    )

    def validate(self) -> None:
        self.header.validate()
        if self.header.msg_type != MSG_TYPE_SERVICE_REQUEST:
            raise InvalidField("request header must have msg_type 2")
        if not 0 <= self.service_id <= 0xFFFF:
            raise InvalidField("service id out of range")
        if len(self.capabilities) != CAPABILITIES_LEN:
            raise InvalidField("capabilities must be 14 bytes")
        if len(self.nonce) != NONCE_LEN:
            raise InvalidField("nonce must be 8 bytes")
        if self.committee_size < 1:
            raise InvalidField("requested committee size k must be >= 1")

    @property
    def committee_size(self) -> int:
        """Requested committee size k (capability bytes 0-1, big-endian)."""
        return int.from_bytes(self.capabilities[:2], "big")


@dataclass(frozen=True)
class OpReturnScript:
    """An OP_RETURN output script carrying one protocol payload."""

    payload: bytes

    def __post_init__(self):
        if len(self.payload) > MAX_OP_RETURN_PAYLOAD:
            raise InvalidField(
                f"payload of {len(self.payload)} bytes exceeds the "
                f"{MAX_OP_RETURN_PAYLOAD}-byte OP_RETURN limit"
            )

    @property
    def payload_length(self) -> int:
        return len(self.payload)

    def __bytes__(self) -> bytes:
        return bytes([OP_RETURN, OP_PUSHDATA1, len(self.payload)]) + self.payload

    @classmethod
    def from_bytes(cls, script: bytes) -> "OpReturnScript":
        if len(script) < 3 or script[0] != OP_RETURN or script[1] != OP_PUSHDATA1:
            raise NotAnonBoot("not an OP_RETURN + OP_PUSHDATA1 script")
        declared = script[2]
        if len(script) != 3 + declared:
            raise LengthMismatch(
                f"script declares {declared} payload bytes but carries "
                f"{len(script) - 3}"
            )
        return cls(script[3:])


def request_capabilities(k: int, extra: bytes = b"") -> bytes:
    """Build a 14-byte capability vector with committee size k in bytes 0-1."""
    if not 1 <= k <= 0xFFFF:
        raise InvalidField("committee size k must fit in 16 bits and be >= 1")
    if len(extra) > CAPABILITIES_LEN - 2:
        raise InvalidField("service-specific capability bytes exceed 12")
    return k.to_bytes(2, "big") + extra.ljust(CAPABILITIES_LEN - 2, b"\x00")


def peer_capabilities(extra: bytes = b"") -> bytes:
    """Build a 14-byte advertisement capability vector (bytes 0-1 unused)."""
    if len(extra) > CAPABILITIES_LEN - 2:
        raise InvalidField("service-specific capability bytes exceed 12")
    return b"\x00\x00" + extra.ljust(CAPABILITIES_LEN - 2, b"\x00")


def encode_address(host: str) -> tuple[bytes, bool]:
    """Pack a textual IP into the 16-byte field; returns (bytes, is_ipv6)."""
    addr = ipaddress.ip_address(host)
    if addr.version == 4:
        return b"\x00" * 10 + b"\xff\xff" + addr.packed, False
    return addr.packed, True


def decode_address(address: bytes, is_ipv6: bool) -> str:
    if is_ipv6:
        return str(ipaddress.IPv6Address(address))
    return str(ipaddress.IPv4Address(address[12:]))


def _is_ipv4_mapped(address: bytes) -> bool:
    return address[:10] == b"\x00" * 10 and address[10:12] == b"\xff\xff"


def encode_peer_advertisement(ad: PeerAdvertisement) -> OpReturnScript:
    """Encode an advertisement into its 80-byte OP_RETURN payload.

    Reserved bits must be zero on encode; decode preserves whatever a newer
    protocol version may put there.
    """
    ad.validate()
    if ad.reserved_flags != 0 or ad.header.reserved_nibble != 0:
        raise InvalidField("reserved bits must be zero on encode")
    type_byte = (ad.header.msg_type << 4) | ad.header.reserved_nibble
    flags_byte = (
        (0x80 if ad.flag_direct else 0)
        | (0x40 if ad.flag_ipv6 else 0)
        | ad.reserved_flags
    )
    payload = _AD_STRUCT.pack(
        ad.header.magic,
        ad.header.version,
        type_byte,
        flags_byte,
        ad.connector_pubkey,
        ad.address,
        ad.port,
        ad.service_id,
        ad.capabilities,
        ad.nonce,
    )
    assert len(payload) == AD_PAYLOAD_LEN
    return OpReturnScript(payload)


def encode_service_request(req: ServiceRequest) -> OpReturnScript:
    """Encode a request into its 28-byte OP_RETURN payload."""
    req.validate()
    if req.header.reserved_nibble != 0:
        raise InvalidField("reserved bits must be zero on encode")
    type_byte = (req.header.msg_type << 4) | req.header.reserved_nibble
    payload = _REQUEST_STRUCT.pack(
        req.header.magic,
        req.header.version,
        type_byte,
        req.service_id,
        req.capabilities,
        req.nonce,
    )
    assert len(payload) == REQUEST_PAYLOAD_LEN
    return OpReturnScript(payload)


def decode_message(script: OpReturnScript | bytes) -> PeerAdvertisement | ServiceRequest:
    """Decode a script into a message; total and deterministic.

    Raises NotAnonBoot for scripts of other protocols (callers skip those),
    UnsupportedVersion / UnknownType / LengthMismatch for recognizably
    broken AnonBoot payloads. Field-level invariants (pubkey prefix,
    IPv4-mapped form, k >= 1) are deliberately not checked here; message
    validation happens during state derivation.
    """
    if isinstance(script, (bytes, bytearray)):
        script = OpReturnScript.from_bytes(bytes(script))
    payload = script.payload
    if len(payload) < 4 or payload[:2] != MAGIC:
        raise NotAnonBoot("payload does not start with the protocol magic")
    version = payload[2]
    if version != VERSION:
        raise UnsupportedVersion(f"version {version}")
    msg_type = payload[3] >> 4
    reserved_nibble = payload[3] & 0x0F
    header = AnonBootHeader(msg_type, version, reserved_nibble)
    if msg_type == MSG_TYPE_PEER_AD:
        if len(payload) != AD_PAYLOAD_LEN:
            raise LengthMismatch(
                f"advertisement payload must be {AD_PAYLOAD_LEN} bytes, "
                f"got {len(payload)}"
            )
        (_, _, _, flags_byte, pubkey, address, port, service_id, caps, nonce) = (
            _AD_STRUCT.unpack(payload)
        )
        return PeerAdvertisement(
            connector_pubkey=pubkey,
            address=address,
            port=port,
            service_id=service_id,
            capabilities=caps,
            nonce=nonce,
            flag_direct=bool(flags_byte & 0x80),
            flag_ipv6=bool(flags_byte & 0x40),
            reserved_flags=flags_byte & 0x3F,
            header=header,
        )
    if msg_type == MSG_TYPE_SERVICE_REQUEST:
        if len(payload) != REQUEST_PAYLOAD_LEN:
            raise LengthMismatch(
                f"request payload must be {REQUEST_PAYLOAD_LEN} bytes, "
                f"got {len(payload)}"
            )
        (_, _, _, service_id, caps, nonce) = _REQUEST_STRUCT.unpack(payload)
        return ServiceRequest(
            service_id=service_id, capabilities=caps, nonce=nonce, header=header
        )
    raise UnknownType(f"message type {msg_type}")
