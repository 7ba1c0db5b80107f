"""Pulse state machine: windows, message validation, and state derivation.

A pulse covers ``pulse_length`` blocks; its first block is the pulse block.
Messages are only valid inside the negotiation window, the
``negotiation_length`` blocks right after the pulse block. The first block
after the window is the spawn block, whose entropy seeds peer election.

    pulse block height  = pulse_index * L_p
    negotiation window  = heights (pulse block, pulse block + L_N]
    spawn block height  = pulse block + L_N + 1

State derivation is a pure function of (chain, pulse index, config): every
participant scanning the same blocks obtains the same repository, service
list, and statistics.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from types import MappingProxyType
from typing import Mapping, NamedTuple

from . import election
from .election import ServiceInstance, Unserved
from .errors import (
    ConfigError,
    ForkDetected,
    InvalidField,
    SpawnBlockMissing,
    WireError,
)
from .hostchain import HostChain
from .pow import PowInput, PowParams, pow_verify
from .wire import (
    MSG_TYPE_PEER_AD,
    NotAnonBoot,
    PeerAdvertisement,
    ServiceRequest,
    decode_message,
)


@dataclass(frozen=True)
class PulseConfig:
    pulse_length: int
    negotiation_length: int
    pow_params: PowParams = field(default_factory=lambda: PowParams(0))
    service_ttl: int = 2
    capacity: float = 1.0

    def __post_init__(self):
        if self.pulse_length < 3:
            raise ConfigError("pulse_length must be >= 3")
        if not 1 <= self.negotiation_length <= self.pulse_length - 2:
            # The spawn block must precede the next pulse block.
            raise ConfigError(
                "negotiation_length must satisfy "
                "1 <= L_N <= pulse_length - 2"
            )
        if self.service_ttl < 1:
            raise ConfigError("service_ttl must be >= 1")


class Position(NamedTuple):
    """Chain position of a transaction; the canonical ordering key."""

    height: int
    tx_index: int


@dataclass(frozen=True)
class PeerStats:
    first_seen_pulse: int
    refresh_count: int
    regularity: Fraction

    @classmethod
    def fresh(cls, pulse_index: int) -> "PeerStats":
        return cls(pulse_index, 1, Fraction(1))

    def refreshed(self, pulse_index: int) -> "PeerStats":
        count = self.refresh_count + 1
        elapsed = pulse_index - self.first_seen_pulse + 1
        return PeerStats(self.first_seen_pulse, count, Fraction(count, elapsed))


@dataclass(frozen=True)
class PeerRecord:
    advertisement: PeerAdvertisement
    position: Position
    stats: PeerStats

    @property
    def pubkey(self) -> bytes:
        return self.advertisement.connector_pubkey


class RejectReason(enum.Enum):
    OUT_OF_WINDOW = "out_of_window"
    STALE_POW = "stale_pow"
    DUPLICATE = "duplicate"
    MALFORMED = "malformed"


@dataclass(frozen=True)
class Rejection:
    position: Position
    reason: RejectReason
    message: PeerAdvertisement | ServiceRequest


@dataclass(frozen=True)
class AnonBootState:
    """Locally derived consensus view for one concluded pulse."""

    pulse_index: int
    repository: tuple[PeerRecord, ...]
    services: tuple[ServiceInstance, ...]
    stats: Mapping[bytes, PeerStats]
    unserved: tuple[Unserved, ...] = ()

    def consensus_equal(self, other: "AnonBootState") -> bool:
        """Equality on consensus-critical content.

        Peer statistics are excluded: a participant syncing from recent
        blocks starts them fresh, and they never influence election.
        """
        return (
            self.pulse_index == other.pulse_index
            and [(r.advertisement, r.position) for r in self.repository]
            == [(r.advertisement, r.position) for r in other.repository]
            and [s.consensus_key() for s in self.services]
            == [s.consensus_key() for s in other.services]
            and self.unserved == other.unserved
        )


def pulse_block_height(pulse_index: int, config: PulseConfig) -> int:
    if pulse_index < 0:
        raise ConfigError("pulse_index must be >= 0")
    return pulse_index * config.pulse_length


def spawn_block_height(pulse_index: int, config: PulseConfig) -> int:
    return pulse_block_height(pulse_index, config) + config.negotiation_length + 1


def negotiation_window(pulse_index: int, config: PulseConfig) -> range:
    """Heights at which messages of this pulse are valid."""
    start = pulse_block_height(pulse_index, config) + 1
    return range(start, start + config.negotiation_length)


def validate_advertisement(
    ad: PeerAdvertisement,
    position: Position,
    pulse_index: int,
    chain: HostChain,
    config: PulseConfig,
    seen: set[bytes] | None = None,
) -> RejectReason | None:
    """Returns None when the advertisement is accepted, else the reason.

    Acceptance requires structural validity, a position inside the pulse's
    negotiation window, a PoW valid against the current pulse block, and a
    connector pubkey not already accepted this pulse (first one wins).
    """
    try:
        ad.validate()
    except InvalidField:
        return RejectReason.MALFORMED
    if position.height not in negotiation_window(pulse_index, config):
        return RejectReason.OUT_OF_WINDOW
    pow_input = _pow_input_for_pulse(ad, pulse_index, chain, config)
    if not pow_verify(pow_input, config.pow_params):
        # Stale classification checks the previous pulse block only, so a
        # recent-sync participant never reads beyond its replay horizon.
        if pulse_index > 0:
            stale_input = _pow_input_for_pulse(ad, pulse_index - 1, chain, config)
            if pow_verify(stale_input, config.pow_params):
                return RejectReason.STALE_POW
        return RejectReason.MALFORMED
    if seen is not None and ad.connector_pubkey in seen:
        return RejectReason.DUPLICATE
    return None


def _pow_input_for_pulse(
    ad: PeerAdvertisement, pulse_index: int, chain: HostChain, config: PulseConfig
) -> PowInput:
    pulse_block = chain.get_block(pulse_block_height(pulse_index, config))
    return PowInput(ad.connector_pubkey, pulse_block.block_hash, ad.nonce)


@dataclass(frozen=True)
class PulseScan:
    """Classified messages of one pulse's block span."""

    accepted_ads: tuple[tuple[PeerAdvertisement, Position], ...]
    requests: tuple[tuple[ServiceRequest, Position], ...]
    rejections: tuple[Rejection, ...]


def scan_pulse(chain: HostChain, pulse_index: int, config: PulseConfig) -> PulseScan:
    """Scan the pulse's blocks (window plus any mined tail up to the next
    pulse block) and classify every protocol message found."""
    window = negotiation_window(pulse_index, config)
    first = window.start
    last_pulse_height = pulse_block_height(pulse_index + 1, config) - 1
    last = min(chain.height, last_pulse_height)
    accepted: list[tuple[PeerAdvertisement, Position]] = []
    requests: list[tuple[ServiceRequest, Position]] = []
    rejections: list[Rejection] = []
    seen: set[bytes] = set()
    for height in range(first, last + 1):
        block = chain.get_block(height)
        for tx_index, tx in enumerate(block.txs):
            try:
                message = decode_message(tx.script)
            except NotAnonBoot:
                continue
            except WireError:
                continue  # undecodable AnonBoot-tagged payloads are skipped
            position = Position(height, tx_index)
            if isinstance(message, PeerAdvertisement):
                reason = validate_advertisement(
                    message, position, pulse_index, chain, config, seen
                )
                if reason is None:
                    seen.add(message.connector_pubkey)
                    accepted.append((message, position))
                else:
                    rejections.append(Rejection(position, reason, message))
            else:
                if height not in window:
                    rejections.append(
                        Rejection(position, RejectReason.OUT_OF_WINDOW, message)
                    )
                    continue
                try:
                    message.validate()
                except InvalidField:
                    rejections.append(
                        Rejection(position, RejectReason.MALFORMED, message)
                    )
                    continue
                requests.append((message, position))
    return PulseScan(tuple(accepted), tuple(requests), tuple(rejections))


def derive_state(
    chain: HostChain,
    pulse_index: int,
    config: PulseConfig,
    previous_state: AnonBootState | None = None,
) -> AnonBootState:
    """Derive the canonical state for a concluded pulse.

    Repository: accepted advertisements in position order. Stats accumulate
    from previous_state when given. Services: survivors of the previous
    pulse with TTL decremented, plus instances newly elected from this
    pulse's aggregated requests and the spawn block's entropy.
    """
    spawn_height = spawn_block_height(pulse_index, config)
    if len(chain) == 0 or chain.height < spawn_height:
        raise SpawnBlockMissing(
            f"pulse {pulse_index} concludes at height {spawn_height}"
        )
    if chain.fork_height is not None and chain.fork_height <= spawn_height:
        raise ForkDetected(
            f"fork at height {chain.fork_height} invalidates pulse {pulse_index}"
        )
    scan = scan_pulse(chain, pulse_index, config)

    stats: dict[bytes, PeerStats] = dict(previous_state.stats) if previous_state else {}
    repository: list[PeerRecord] = []
    for ad, position in scan.accepted_ads:
        key = ad.connector_pubkey
        stats[key] = (
            stats[key].refreshed(pulse_index) if key in stats
            else PeerStats.fresh(pulse_index)
        )
        repository.append(PeerRecord(ad, position, stats[key]))

    services: list[ServiceInstance] = []
    if previous_state is not None:
        for instance in previous_state.services:
            remaining = instance.ttl_remaining - 1
            if remaining > 0:
                services.append(replace(instance, ttl_remaining=remaining))

    unserved: list[Unserved] = []
    spawn_block = chain.get_block(spawn_height)
    for request_class in election.aggregate_requests(
        req for req, _ in scan.requests
    ):
        seed = election.derive_seed(spawn_block, request_class)
        outcome = election.elect(
            repository,
            request_class,
            seed,
            spawned_pulse=pulse_index,
            ttl=config.service_ttl,
        )
        if isinstance(outcome, ServiceInstance):
            services.append(outcome)
        else:
            unserved.append(outcome)

    return AnonBootState(
        pulse_index=pulse_index,
        repository=tuple(repository),
        services=tuple(services),
        stats=MappingProxyType(stats),
        unserved=tuple(unserved),
    )


def latest_concluded_pulse(chain: HostChain, config: PulseConfig) -> int:
    """Largest pulse index whose spawn block is on the chain."""
    if len(chain) == 0:
        raise SpawnBlockMissing("chain is empty")
    latest = (chain.height - config.negotiation_length - 1) // config.pulse_length
    if latest < 0:
        raise SpawnBlockMissing("no pulse has concluded yet")
    return latest


def derive_state_from_recent(
    chain: HostChain, config: PulseConfig
) -> AnonBootState:
    """Sync from recent blocks only: replay the last service_ttl pulses.

    Equals a full-history derivation on all consensus content; peer
    statistics start fresh at the replay horizon.
    """
    latest = latest_concluded_pulse(chain, config)
    start = max(0, latest - (config.service_ttl - 1))
    state: AnonBootState | None = None
    for pulse_index in range(start, latest + 1):
        state = derive_state(chain, pulse_index, config, state)
    assert state is not None
    return state


def format_state(state: AnonBootState) -> str:
    """Structured text dump: one record per peer and per service."""
    lines = [f"pulse {state.pulse_index}"]
    for record in state.repository:
        ad = record.advertisement
        st = record.stats
        lines.append(
            f"peer pos={record.position.height}:{record.position.tx_index}"
            f" pubkey={ad.connector_pubkey.hex()}"
            f" service={ad.service_id}"
            f" addr={ad.host}:{ad.port}"
            f" direct={int(ad.flag_direct)}"
            f" caps={ad.capabilities.hex()}"
            f" first_seen={st.first_seen_pulse}"
            f" refreshes={st.refresh_count}"
            f" regularity={float(st.regularity):.3f}"
        )
    for instance in state.services:
        members = ",".join(p.pubkey.hex()[:16] for p in instance.peers)
        lines.append(
            f"service id={instance.service_id}"
            f" k={instance.committee_size}"
            f" spawned={instance.spawned_pulse}"
            f" ttl={instance.ttl_remaining}"
            f" caps={instance.merged_capabilities.hex()}"
            f" peers={members}"
        )
    for unserved in state.unserved:
        lines.append(
            f"unserved id={unserved.service_id}"
            f" needed={unserved.needed} available={unserved.available}"
        )
    return "\n".join(lines) + "\n"
