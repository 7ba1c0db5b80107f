"""Simulated connector layer: handover authentication, circuits, bootstrap.

Handover proves that the contacted endpoint holds the private key matching
the advertised connector public key: the caller sends a fresh 32-byte
challenge, the peer signs it, and the signature is verified against the
advertisement. Transport is an in-process registry of simulated peers with
reachability flags; every connection attempt is logged so tests can assert
properties like "the user contacted exactly one circuit hop directly".
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec

from . import _kernels as kernels
from .election import ServiceInstance, local_select
from .errors import Exhausted, StaleInstanceError
from .hostchain import HostChain
from .pulse import PeerRecord, PulseConfig, derive_state

CURVE = ec.SECP256K1()
# Group order of secp256k1; private scalars are reduced into [1, order-1].
_CURVE_ORDER = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141


@dataclass(frozen=True)
class KeyPair:
    """Signing key pair whose public encoding is a 33-byte compressed point."""

    private_key: ec.EllipticCurvePrivateKey
    public_bytes: bytes

    @classmethod
    def from_seed(cls, seed: bytes) -> "KeyPair":
        scalar = int.from_bytes(kernels.sha256(seed), "big") % (_CURVE_ORDER - 1) + 1
        private_key = ec.derive_private_key(scalar, CURVE)
        public_bytes = private_key.public_key().public_bytes(
            serialization.Encoding.X962, serialization.PublicFormat.CompressedPoint
        )
        return cls(private_key, public_bytes)

    def sign(self, message: bytes) -> bytes:
        return self.private_key.sign(message, ec.ECDSA(hashes.SHA256()))


def verify_signature(pubkey: bytes, signature: bytes, message: bytes) -> bool:
    try:
        public_key = ec.EllipticCurvePublicKey.from_encoded_point(CURVE, pubkey)
        public_key.verify(signature, message, ec.ECDSA(hashes.SHA256()))
        return True
    except (InvalidSignature, ValueError):
        return False


@dataclass
class SimulatedPeer:
    """Endpoint behaviour behind one advertised (address, port).

    ``keypair`` is whatever key the endpoint actually controls; a Sybil
    operator that advertised someone else's key simply holds a different
    one. ``keypair=None`` models a peer that accepts connections but never
    answers challenges.
    """

    keypair: KeyPair | None
    reachable: bool = True
    chain: HostChain | None = None

    def respond(self, challenge: bytes) -> bytes | None:
        if self.keypair is None:
            return None
        return self.keypair.sign(challenge)


@dataclass(frozen=True)
class ConnectionRecord:
    initiator: str
    address: bytes
    port: int
    relayed: bool


class SimulatedTransport:
    """In-process endpoint registry with a connection log."""

    def __init__(self):
        self._endpoints: dict[tuple[bytes, int], SimulatedPeer] = {}
        self.log: list[ConnectionRecord] = []

    def register(self, address: bytes, port: int, peer: SimulatedPeer) -> None:
        self._endpoints[(address, port)] = peer

    def connect(
        self, address: bytes, port: int, *, initiator: str = "user",
        relayed: bool = False,
    ) -> SimulatedPeer | None:
        self.log.append(ConnectionRecord(initiator, address, port, relayed))
        peer = self._endpoints.get((address, port))
        if peer is None or not peer.reachable:
            return None
        return peer

    def user_direct_connections(self, since: int = 0) -> int:
        return sum(
            1 for rec in self.log[since:]
            if rec.initiator == "user" and not rec.relayed
        )


class HandoverOutcome(enum.Enum):
    AUTHENTICATED = "authenticated"
    UNREACHABLE = "unreachable"
    KEY_MISMATCH = "key_mismatch"


@dataclass(frozen=True)
class HandoverResult:
    peer: PeerRecord
    outcome: HandoverOutcome
    # Opaque success token; from here on the anonymity service protocol
    # takes over, which the simulation does not model.
    token: bytes | None = None


def handover(
    record: PeerRecord,
    challenge: bytes,
    transport: SimulatedTransport,
    *,
    initiator: str = "user",
    relayed: bool = False,
) -> HandoverResult:
    """Authenticate one peer against its advertisement via a fresh challenge."""
    ad = record.advertisement
    peer = transport.connect(
        ad.address, ad.port, initiator=initiator, relayed=relayed
    )
    if peer is None:
        return HandoverResult(record, HandoverOutcome.UNREACHABLE)
    signature = peer.respond(challenge)
    if signature is None:
        return HandoverResult(record, HandoverOutcome.UNREACHABLE)
    if not verify_signature(ad.connector_pubkey, signature, challenge):
        return HandoverResult(record, HandoverOutcome.KEY_MISMATCH)
    token = kernels.sha256(b"handover" + challenge)
    return HandoverResult(record, HandoverOutcome.AUTHENTICATED, token)


def build_circuit(
    repository: Sequence[PeerRecord],
    hop_constraints: Sequence[Callable[[PeerRecord], bool]]
    | Callable[[PeerRecord], bool],
    length: int,
    transport: SimulatedTransport,
    rng: random.Random,
) -> list[PeerRecord]:
    """Build an onion circuit hop by hop.

    Hop 1 is selected and authenticated directly; every later hop is
    authenticated through the partially established circuit (relayed), so
    the user's only direct connection is to the first hop. A peer failing
    its handover is dropped and replaced. Returns ``length`` distinct
    authenticated hops or raises Exhausted.
    """
    if length < 1:
        raise Exhausted("circuit length must be >= 1")
    if callable(hop_constraints):
        constraints = [hop_constraints] * length
    else:
        constraints = list(hop_constraints)
        if len(constraints) != length:
            raise Exhausted("need one constraint per hop")
    hops: list[PeerRecord] = []
    tried: set[bytes] = set()
    for hop_index in range(length):
        predicate = constraints[hop_index]
        while True:
            def eligible(record: PeerRecord) -> bool:
                return record.pubkey not in tried and predicate(record)

            try:
                (candidate,) = local_select(
                    repository, eligible, 1, lambda record: True, rng
                )
            except Exhausted:
                raise Exhausted(
                    f"no remaining candidate for hop {hop_index + 1}"
                ) from None
            tried.add(candidate.pubkey)
            result = handover(
                candidate,
                rng.randbytes(32),
                transport,
                initiator="user" if hop_index == 0 else "circuit",
                relayed=hop_index > 0,
            )
            if result.outcome is HandoverOutcome.AUTHENTICATED:
                hops.append(candidate)
                break
    return hops


@dataclass(frozen=True)
class LinkResult:
    source: bytes
    target: bytes
    outcome: HandoverOutcome | None  # None when the source peer abstained


@dataclass(frozen=True)
class BootstrapReport:
    instance: ServiceInstance
    live: bool
    links: tuple[LinkResult, ...]
    abstained: tuple[bytes, ...]

    @property
    def failing_link(self) -> LinkResult | None:
        for link in self.links:
            if link.outcome is not HandoverOutcome.AUTHENTICATED:
                return link
        return None


def bootstrap_service(
    instance: ServiceInstance,
    transport: SimulatedTransport,
    registry: Mapping[bytes, SimulatedPeer],
    config: PulseConfig,
    rng: random.Random,
) -> BootstrapReport:
    """Bootstrap an elected instance over a cascade topology.

    Every member holding a local chain copy replays the election and
    abstains if its replay disagrees with the instance. Each peer then
    opens an authenticated link to its cascade successor; the instance is
    live iff nobody abstained and all links authenticated.
    """
    if instance.ttl_remaining <= 0:
        raise StaleInstanceError(
            f"instance of service {instance.service_id} spawned at pulse "
            f"{instance.spawned_pulse} has expired"
        )
    abstained = []
    for record in instance.peers:
        peer = registry.get(record.pubkey)
        if peer is None or peer.chain is None:
            continue
        replayed = derive_state(peer.chain, instance.spawned_pulse, config)
        match = next(
            (
                service
                for service in replayed.services
                if service.service_id == instance.service_id
                and service.spawned_pulse == instance.spawned_pulse
            ),
            None,
        )
        if match is None or match.consensus_key() != instance.consensus_key():
            abstained.append(record.pubkey)

    links = []
    for source, target in zip(instance.peers, instance.peers[1:]):
        if source.pubkey in abstained:
            links.append(LinkResult(source.pubkey, target.pubkey, None))
            continue
        result = handover(
            target,
            rng.randbytes(32),
            transport,
            initiator=source.pubkey.hex()[:16],
        )
        links.append(LinkResult(source.pubkey, target.pubkey, result.outcome))

    live = not abstained and all(
        link.outcome is HandoverOutcome.AUTHENTICATED for link in links
    )
    return BootstrapReport(instance, live, tuple(links), tuple(abstained))
