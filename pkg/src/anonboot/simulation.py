"""Scripted multi-pulse simulation: peers, users, elections, and handovers.

One run drives a population of honest peers (which refresh valid
advertisements every pulse), wrong-key adversarial peers (valid PoW, but
their endpoints cannot sign for the advertised key), a stale actor that
replays a previous pulse's PoW, and a late actor whose advertisement lands
after the negotiation window. Users request one service per class each
pulse; new instances are bootstrapped over the simulated transport, and at
the end every repository member is probed with a handover and a circuit is
built through the first service class.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .connector import (
    BootstrapReport,
    HandoverOutcome,
    KeyPair,
    SimulatedPeer,
    SimulatedTransport,
    bootstrap_service,
    handover,
    build_circuit,
)
from .errors import ConfigError
from .hostchain import ChainConfig, HostChain
from .pow import PowParams, pow_solve
from .pulse import (
    AnonBootState,
    PulseConfig,
    Rejection,
    derive_state,
    pulse_block_height,
    scan_pulse,
    spawn_block_height,
)
from .wire import (
    PeerAdvertisement,
    ServiceRequest,
    encode_address,
    encode_peer_advertisement,
    encode_service_request,
    peer_capabilities,
    request_capabilities,
)

CAPABILITY_LEVEL_HONEST = 5
CAPABILITY_LEVEL_ADVERSARIAL = 0


@dataclass(frozen=True)
class ScenarioConfig:
    honest_peers: int = 20
    adversarial_peers: int = 5
    requests: int = 2
    pulses: int = 3
    pulse_length: int = 12
    negotiation_length: int = 3
    difficulty_bits: int = 8
    capacity: Fraction = Fraction(1, 4)
    service_ttl: int = 2
    committee_size: int = 3
    circuit_length: int = 3
    include_stale_ad: bool = True
    include_late_ad: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.requests < 1:
            raise ConfigError("need at least one service request")
        if self.honest_peers < self.requests * max(
            self.committee_size, self.circuit_length
        ):
            raise ConfigError(
                "not enough honest peers to serve every request class"
            )


@dataclass
class SimulatedIdentity:
    keypair: KeyPair
    advertisement_template: PeerAdvertisement
    endpoint: SimulatedPeer
    adversarial: bool


@dataclass
class SimulationReport:
    config: ScenarioConfig
    final_state: AnonBootState
    states: list[AnonBootState]
    rejections: list[Rejection]
    rejection_counts: Counter
    bootstrap_reports: list[BootstrapReport]
    probe_outcomes: dict[bytes, HandoverOutcome]
    adversarial_pubkeys: set[bytes]
    excluded_pubkeys: set[bytes]
    circuit: list
    circuit_direct_connections: int
    exported_chain: str = field(repr=False, default="")

    def summary(self) -> str:
        lines = [
            f"pulses run: {len(self.states)}",
            f"final repository size: {len(self.final_state.repository)}",
            f"live services: "
            f"{sum(1 for r in self.bootstrap_reports if r.live)}"
            f"/{len(self.bootstrap_reports)} bootstrapped",
            "rejections: "
            + ", ".join(
                f"{reason.value}={count}"
                for reason, count in sorted(
                    self.rejection_counts.items(), key=lambda kv: kv[0].value
                )
            ),
            "handover probe: "
            + ", ".join(
                f"{outcome.value}={count}"
                for outcome, count in sorted(
                    Counter(self.probe_outcomes.values()).items(),
                    key=lambda kv: kv[0].value,
                )
            ),
            f"circuit length: {len(self.circuit)} "
            f"(direct user connections: {self.circuit_direct_connections})",
        ]
        return "\n".join(lines)


def _make_identity(
    rng: random.Random,
    transport: SimulatedTransport,
    chain: HostChain,
    index: int,
    service_id: int,
    adversarial: bool,
) -> SimulatedIdentity:
    advertised = KeyPair.from_seed(rng.randbytes(16))
    if adversarial:
        endpoint_key = KeyPair.from_seed(rng.randbytes(16))  # not the advertised one
        level = CAPABILITY_LEVEL_ADVERSARIAL
    else:
        endpoint_key = advertised
        level = CAPABILITY_LEVEL_HONEST
    address, _ = encode_address("10.0.0.1")
    port = 9000 + index
    template = PeerAdvertisement(
        connector_pubkey=advertised.public_bytes,
        address=address,
        port=port,
        service_id=service_id,
        capabilities=peer_capabilities(bytes([level])),
        nonce=bytes(8),
    )
    endpoint = SimulatedPeer(keypair=endpoint_key, chain=chain)
    transport.register(address, port, endpoint)
    return SimulatedIdentity(advertised, template, endpoint, adversarial)


def _advertise(
    identity: SimulatedIdentity,
    chain: HostChain,
    pulse_block_hash: bytes,
    pow_params: PowParams,
) -> None:
    nonce = pow_solve(
        identity.advertisement_template.connector_pubkey,
        pulse_block_hash,
        pow_params,
    )
    ad = replace(identity.advertisement_template, nonce=nonce)
    chain.enqueue_message(encode_peer_advertisement(ad))


def run_scenario(config: ScenarioConfig) -> SimulationReport:
    rng = random.Random(config.seed)
    pow_params = PowParams(config.difficulty_bits)
    pulse_config = PulseConfig(
        pulse_length=config.pulse_length,
        negotiation_length=config.negotiation_length,
        pow_params=pow_params,
        service_ttl=config.service_ttl,
        capacity=float(config.capacity),
    )
    chain = HostChain(ChainConfig(capacity=config.capacity))
    transport = SimulatedTransport()

    service_ids = [1 + i for i in range(config.requests)]
    identities: list[SimulatedIdentity] = []
    for i in range(config.honest_peers):
        identities.append(
            _make_identity(
                rng, transport, chain, i, service_ids[i % len(service_ids)], False
            )
        )
    for j in range(config.adversarial_peers):
        identities.append(
            _make_identity(
                rng,
                transport,
                chain,
                config.honest_peers + j,
                service_ids[j % len(service_ids)],
                True,
            )
        )
    # Actors producing invalid advertisements (distinct identities, valid keys).
    stale_actor = _make_identity(
        rng, transport, chain, len(identities), service_ids[0], False
    )
    late_actor = _make_identity(
        rng, transport, chain, len(identities) + 1, service_ids[0], False
    )

    registry = {
        identity.advertisement_template.connector_pubkey: identity.endpoint
        for identity in identities + [stale_actor, late_actor]
    }

    states: list[AnonBootState] = []
    rejections: list[Rejection] = []
    bootstrap_reports: list[BootstrapReport] = []
    previous: AnonBootState | None = None

    for pulse_index in range(config.pulses):
        pulse_block = chain.get_block(pulse_block_height(pulse_index, pulse_config))
        for identity in identities:
            _advertise(identity, chain, pulse_block.block_hash, pow_params)
        if config.include_stale_ad and pulse_index > 0:
            previous_pulse_block = chain.get_block(
                pulse_block_height(pulse_index - 1, pulse_config)
            )
            _advertise(
                stale_actor, chain, previous_pulse_block.block_hash, pow_params
            )
        for service_id in service_ids:
            request = ServiceRequest(
                service_id=service_id,
                capabilities=request_capabilities(
                    config.committee_size, bytes([CAPABILITY_LEVEL_HONEST])
                ),
                nonce=rng.randbytes(8),
            )
            chain.enqueue_message(encode_service_request(request))

        for _ in range(config.negotiation_length):
            chain.mine_block()
        if config.include_late_ad:
            _advertise(late_actor, chain, pulse_block.block_hash, pow_params)
        chain.mine_block()  # spawn block; late messages land here
        assert chain.height == spawn_block_height(pulse_index, pulse_config)

        state = derive_state(chain, pulse_index, pulse_config, previous)
        scan = scan_pulse(chain, pulse_index, pulse_config)
        rejections.extend(scan.rejections)
        states.append(state)
        for instance in state.services:
            if instance.spawned_pulse == pulse_index:
                bootstrap_reports.append(
                    bootstrap_service(instance, transport, registry, pulse_config, rng)
                )
        previous = state

        # Mine out the pulse, ending on the next pulse block.
        next_pulse_height = pulse_block_height(pulse_index + 1, pulse_config)
        while chain.height < next_pulse_height:
            chain.mine_block()

    final_state = states[-1]

    # Circuit through the first service class (before the probe, so the
    # transport log window for direct-connection accounting stays clean).
    level = CAPABILITY_LEVEL_HONEST

    def circuit_constraint(record) -> bool:
        ad = record.advertisement
        return ad.service_id == service_ids[0] and ad.capabilities[2] >= level

    log_start = len(transport.log)
    circuit = build_circuit(
        final_state.repository,
        circuit_constraint,
        config.circuit_length,
        transport,
        rng,
    )
    direct = transport.user_direct_connections(since=log_start)

    probe_outcomes: dict[bytes, HandoverOutcome] = {}
    for record in final_state.repository:
        result = handover(record, rng.randbytes(32), transport)
        probe_outcomes[record.pubkey] = result.outcome

    adversarial_pubkeys = {
        identity.advertisement_template.connector_pubkey
        for identity in identities
        if identity.adversarial
    }
    excluded = {
        stale_actor.advertisement_template.connector_pubkey,
        late_actor.advertisement_template.connector_pubkey,
    }

    return SimulationReport(
        config=config,
        final_state=final_state,
        states=states,
        rejections=rejections,
        rejection_counts=Counter(r.reason for r in rejections),
        bootstrap_reports=bootstrap_reports,
        probe_outcomes=probe_outcomes,
        adversarial_pubkeys=adversarial_pubkeys,
        excluded_pubkeys=excluded,
        circuit=circuit,
        circuit_direct_connections=direct,
        exported_chain=chain.export_lines(),
    )
