"""Request aggregation, seed derivation, and deterministic peer election.

The election seed combines spawn-block entropy with all request nonces:

    seed = SHA256( spawn_entropy || SHA256(nonce_1 || ... || nonce_m) )

with nonces in canonical chain order, so every participant derives the same
seed and no single requester can cancel the others' contributions. The seed
drives a SHA-256 counter-mode PRNG (rejection-sampled 64-bit chunks) through
a Fisher-Yates shuffle of the eligible peers; the first k shuffled peers are
the committee, in cascade order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterable, Sequence

from . import _kernels as kernels
from .errors import Exhausted, InvalidField
from .hostchain import Block, extract_entropy
from .wire import CAPABILITIES_LEN, ServiceRequest

if TYPE_CHECKING:
    import random

    from .pulse import PeerRecord

DEFAULT_SERVICE_TTL = 2

# Per-service capability comparators: (peer_caps, required_caps) -> bool over
# the service-specific bytes 2..13. Unregistered services use the default.
_COMPARATORS: dict[int, Callable[[bytes, bytes], bool]] = {}


def register_capability_comparator(
    service_id: int, comparator: Callable[[bytes, bytes], bool]
) -> None:
    _COMPARATORS[service_id] = comparator


def default_capability_comparator(peer_caps: bytes, required: bytes) -> bool:
    return all(p >= r for p, r in zip(peer_caps, required))


def capabilities_satisfy(service_id: int, peer_caps: bytes, required: bytes) -> bool:
    """Check peer capability bytes 2-13 against the merged requirement."""
    comparator = _COMPARATORS.get(service_id, default_capability_comparator)
    return comparator(peer_caps[2:CAPABILITIES_LEN], required[2:CAPABILITIES_LEN])


class Prng:
    """Deterministic PRNG: block j = SHA256(seed || j_be64), consumed as a
    byte stream; integers drawn by rejection sampling on 64-bit chunks."""

    __slots__ = ("seed", "_counter", "_block", "_offset")

    def __init__(self, seed: bytes):
        if len(seed) != 32:
            raise InvalidField("PRNG seed must be 32 bytes")
        self.seed = seed
        self._counter = 0
        self._block = b""
        self._offset = 32

    def next_u64(self) -> int:
        if self._offset >= 32:
            self._block = kernels.prng_block(self.seed, self._counter)
            self._counter += 1
            self._offset = 0
        value = int.from_bytes(self._block[self._offset : self._offset + 8], "big")
        self._offset += 8
        return value

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        limit = ((1 << 64) // n) * n
        while True:
            value = self.next_u64()
            if value < limit:
                return value % n

    def shuffle(self, items: Sequence) -> list:
        """Fisher-Yates shuffle (last index down); returns a new list."""
        arr = list(items)
        for i in range(len(arr) - 1, 0, -1):
            j = self.randbelow(i + 1)
            arr[i], arr[j] = arr[j], arr[i]
        return arr


@dataclass(frozen=True)
class RequestClass:
    """All requests for one service id within a pulse, in chain order."""

    service_id: int
    requests: tuple[ServiceRequest, ...]
    merged_capabilities: bytes

    @property
    def committee_size(self) -> int:
        return int.from_bytes(self.merged_capabilities[:2], "big")

    @property
    def nonces(self) -> tuple[bytes, ...]:
        return tuple(req.nonce for req in self.requests)


@dataclass(frozen=True)
class ServiceInstance:
    """An elected committee bound to merged capabilities and a TTL."""

    service_id: int
    merged_capabilities: bytes
    peers: tuple["PeerRecord", ...]
    spawned_pulse: int
    ttl_remaining: int

    @property
    def committee_size(self) -> int:
        return len(self.peers)

    def consensus_key(self) -> tuple:
        """Identity under consensus comparison (stats-free)."""
        return (
            self.service_id,
            self.merged_capabilities,
            tuple((p.advertisement, p.position) for p in self.peers),
            self.spawned_pulse,
            self.ttl_remaining,
        )


@dataclass(frozen=True)
class Unserved:
    """Election outcome when too few eligible peers exist for the class."""

    service_id: int
    needed: int
    available: int


def aggregate_requests(
    requests: Iterable[ServiceRequest],
) -> list[RequestClass]:
    """Group requests by service id; merge capabilities element-wise (byte
    maximum = most restrictive). Classes come back in ascending service id;
    requests keep their canonical chain order within each class."""
    classes: dict[int, list[ServiceRequest]] = {}
    for req in requests:
        classes.setdefault(req.service_id, []).append(req)
    result = []
    for service_id in sorted(classes):
        members = classes[service_id]
        merged = bytes(
            max(req.capabilities[i] for req in members)
            for i in range(CAPABILITIES_LEN)
        )
        result.append(
            RequestClass(
                service_id=service_id,
                requests=tuple(members),
                merged_capabilities=merged,
            )
        )
    return result


def derive_seed(spawn_block: Block | bytes, request_class: RequestClass) -> bytes:
    """Election seed from spawn-block entropy plus the class's nonces."""
    if isinstance(spawn_block, Block):
        entropy = extract_entropy(spawn_block)
    else:
        entropy = spawn_block
    if len(entropy) != 32:
        raise InvalidField("spawn entropy must be 32 bytes")
    if not request_class.requests:
        raise InvalidField("cannot derive a seed for an empty request class")
    nonce_digest = kernels.sha256(b"".join(request_class.nonces))
    return kernels.sha256(entropy + nonce_digest)


def eligible_peers(
    repository: Sequence["PeerRecord"], request_class: RequestClass
) -> list["PeerRecord"]:
    """Repository members matching the class's service id and capabilities,
    in canonical repository order."""
    return [
        record
        for record in repository
        if record.advertisement.service_id == request_class.service_id
        and capabilities_satisfy(
            request_class.service_id,
            record.advertisement.capabilities,
            request_class.merged_capabilities,
        )
    ]


def committee_indices(seed: bytes, eligible_count: int, k: int) -> list[int]:
    """First k positions of the seeded shuffle of range(eligible_count)."""
    return kernels.shuffle_prefix(seed, eligible_count, k)


def elect(
    repository: Sequence["PeerRecord"],
    request_class: RequestClass,
    seed: bytes,
    *,
    spawned_pulse: int = 0,
    ttl: int = DEFAULT_SERVICE_TTL,
) -> ServiceInstance | Unserved:
    """Deterministically elect a committee for one request class.

    Pure function of its inputs: every participant electing from the same
    repository and seed obtains the identical instance.
    """
    k = request_class.committee_size
    if k < 1:
        raise InvalidField("committee size k must be >= 1")
    eligible = eligible_peers(repository, request_class)
    if len(eligible) < k:
        return Unserved(
            service_id=request_class.service_id, needed=k, available=len(eligible)
        )
    order = committee_indices(seed, len(eligible), k)
    peers = tuple(eligible[i] for i in order)
    return ServiceInstance(
        service_id=request_class.service_id,
        merged_capabilities=request_class.merged_capabilities,
        peers=peers,
        spawned_pulse=spawned_pulse,
        ttl_remaining=ttl,
    )


def local_select(
    repository: Sequence["PeerRecord"],
    constraints: Callable[["PeerRecord"], bool],
    count: int,
    reachable: Callable[["PeerRecord"], bool],
    rng: "random.Random",
) -> list["PeerRecord"]:
    """Instant pulse-independent peer selection from the local repository.

    Samples uniformly (user randomness, not the election seed) among peers
    satisfying the constraints, replacing any unreachable peer until
    ``count`` reachable peers are found. Raises Exhausted otherwise.
    """
    candidates = [record for record in repository if constraints(record)]
    selected: list["PeerRecord"] = []
    while len(selected) < count:
        if not candidates:
            raise Exhausted(
                f"needed {count} reachable eligible peers, found {len(selected)}"
            )
        record = candidates.pop(rng.randrange(len(candidates)))
        if reachable(record):
            selected.append(record)
    return selected
