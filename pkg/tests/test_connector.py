"""Connector tests: handover authentication, circuits, cascade bootstrap."""

import random
from dataclasses import replace
from fractions import Fraction

import pytest

from anonboot.connector import (
    BootstrapReport,
    HandoverOutcome,
    KeyPair,
    SimulatedPeer,
    SimulatedTransport,
    bootstrap_service,
    build_circuit,
    handover,
    verify_signature,
)
from anonboot.errors import Exhausted, StaleInstanceError
from anonboot.hostchain import ChainConfig, HostChain
from anonboot.pulse import (
    PeerRecord,
    PeerStats,
    Position,
    PulseConfig,
    derive_state,
    pulse_block_height,
    spawn_block_height,
)
from anonboot.pow import PowParams
from anonboot.wire import (
    encode_peer_advertisement,
    encode_service_request,
)

from helpers import make_ad, make_request, solved_ad


def make_peer_setup(tag: int, *, wrong_key=False, reachable=True, silent=False,
                    transport=None, **ad_overrides):
    """A record + registered simulated endpoint; returns (record, keypair)."""
    keypair = KeyPair.from_seed(tag.to_bytes(8, "big"))
    ad = make_ad(tag, connector_pubkey=keypair.public_bytes, **ad_overrides)
    record = PeerRecord(ad, Position(1, tag), PeerStats.fresh(0))
    endpoint_key = (
        None if silent
        else KeyPair.from_seed(b"imposter" + tag.to_bytes(8, "big"))
        if wrong_key
        else keypair
    )
    peer = SimulatedPeer(keypair=endpoint_key, reachable=reachable)
    if transport is not None:
        transport.register(ad.address, ad.port, peer)
    return record, peer


class TestKeys:
    def test_deterministic_compressed_keys(self):
        first = KeyPair.from_seed(b"seed")
        second = KeyPair.from_seed(b"seed")
        assert first.public_bytes == second.public_bytes
        assert len(first.public_bytes) == 33
        assert first.public_bytes[0] in (2, 3)

    def test_sign_verify(self):
        keypair = KeyPair.from_seed(b"signer")
        signature = keypair.sign(b"challenge")
        assert verify_signature(keypair.public_bytes, signature, b"challenge")
        assert not verify_signature(keypair.public_bytes, signature, b"other")

    def test_verify_rejects_garbage_key(self):
        assert not verify_signature(b"\x02" + bytes(32), b"sig", b"msg")


class TestHandover:
    def test_honest_peer_authenticates(self):
        transport = SimulatedTransport()
        record, _ = make_peer_setup(1, transport=transport)
        result = handover(record, bytes(32), transport)
        assert result.outcome is HandoverOutcome.AUTHENTICATED
        assert result.token is not None

    def test_wrong_key_detected(self):
        transport = SimulatedTransport()
        record, _ = make_peer_setup(2, wrong_key=True, transport=transport)
        result = handover(record, bytes(32), transport)
        assert result.outcome is HandoverOutcome.KEY_MISMATCH

    def test_unreachable_flag(self):
        transport = SimulatedTransport()
        record, _ = make_peer_setup(3, reachable=False, transport=transport)
        assert handover(record, bytes(32), transport).outcome is (
            HandoverOutcome.UNREACHABLE
        )

    def test_unregistered_endpoint(self):
        transport = SimulatedTransport()
        record, _ = make_peer_setup(4, transport=None)
        assert handover(record, bytes(32), transport).outcome is (
            HandoverOutcome.UNREACHABLE
        )

    def test_silent_peer(self):
        transport = SimulatedTransport()
        record, _ = make_peer_setup(5, silent=True, transport=transport)
        assert handover(record, bytes(32), transport).outcome is (
            HandoverOutcome.UNREACHABLE
        )

    def test_impersonation_never_authenticates(self):
        transport = SimulatedTransport()
        rng = random.Random(17)
        successes = 0
        record, _ = make_peer_setup(6, wrong_key=True, transport=transport)
        for _ in range(1000):
            result = handover(record, rng.randbytes(32), transport)
            if result.outcome is HandoverOutcome.AUTHENTICATED:
                successes += 1
        assert successes == 0


class TestCircuit:
    def _repository(self, transport, count=6, wrong=()):
        records = []
        for tag in range(count):
            record, _ = make_peer_setup(
                tag, wrong_key=tag in wrong, transport=transport
            )
            records.append(record)
        return records

    def test_three_hops_one_direct_connection(self):
        transport = SimulatedTransport()
        repository = self._repository(transport)
        circuit = build_circuit(
            repository, lambda r: True, 3, transport, random.Random(0)
        )
        assert len({hop.pubkey for hop in circuit}) == 3
        assert transport.user_direct_connections() == 1

    def test_failed_candidate_replaced(self):
        transport = SimulatedTransport()
        repository = self._repository(transport, count=6, wrong={0, 1, 2})
        bad = {repository[i].pubkey for i in (0, 1, 2)}
        circuit = build_circuit(
            repository, lambda r: True, 3, transport, random.Random(1)
        )
        assert bad.isdisjoint({hop.pubkey for hop in circuit})
        assert len(circuit) == 3

    def test_exhausted(self):
        transport = SimulatedTransport()
        repository = self._repository(transport, count=2)
        with pytest.raises(Exhausted):
            build_circuit(repository, lambda r: True, 3, transport, random.Random(2))

    def test_per_hop_constraints(self):
        transport = SimulatedTransport()
        repository = self._repository(transport, count=6)
        hop_targets = [repository[4].pubkey, repository[1].pubkey, repository[5].pubkey]
        constraints = [
            (lambda target: lambda r: r.pubkey == target)(t) for t in hop_targets
        ]
        circuit = build_circuit(
            repository, constraints, 3, transport, random.Random(3)
        )
        assert [hop.pubkey for hop in circuit] == hop_targets


def build_bootstrap_world(*, corrupt_member=False, wrong_key_member=False):
    """A one-pulse world with six peers and one elected instance."""
    config = PulseConfig(
        pulse_length=12, negotiation_length=3,
        pow_params=PowParams(0), service_ttl=2,
    )
    chain = HostChain(ChainConfig(capacity=Fraction(1)))
    transport = SimulatedTransport()
    registry = {}
    rng = random.Random(9)

    for tag in range(6):
        keypair = KeyPair.from_seed(tag.to_bytes(8, "big"))
        endpoint_key = keypair
        if wrong_key_member and tag == 0:
            endpoint_key = KeyPair.from_seed(b"not-the-advertised-key")
        ad = make_ad(tag, connector_pubkey=keypair.public_bytes)
        chain.enqueue_message(bytes(encode_peer_advertisement(ad)))
        peer = SimulatedPeer(keypair=endpoint_key, chain=chain)
        transport.register(ad.address, ad.port, peer)
        registry[keypair.public_bytes] = peer
    chain.enqueue_message(
        bytes(encode_service_request(make_request(k=6, extra=b"\x05", nonce=rng.randbytes(8))))
    )
    while chain.height < spawn_block_height(0, config):
        chain.mine_block()
    state = derive_state(chain, 0, config)
    (instance,) = state.services

    if corrupt_member:
        # One member sees a divergent chain copy: an extra request changes
        # the seed, so its replayed committee disagrees and it abstains.
        tampered = HostChain(ChainConfig(capacity=Fraction(1)))
        for tag in range(6):
            keypair = KeyPair.from_seed(tag.to_bytes(8, "big"))
            ad = make_ad(tag, connector_pubkey=keypair.public_bytes)
            tampered.enqueue_message(bytes(encode_peer_advertisement(ad)))
        tampered.enqueue_message(
            bytes(encode_service_request(make_request(k=6, extra=b"\x05", nonce=b"\xee" * 8)))
        )
        while tampered.height < spawn_block_height(0, config):
            tampered.mine_block()
        victim = instance.peers[1].pubkey
        registry[victim].chain = tampered
    return config, transport, registry, instance, rng


class TestBootstrap:
    def test_all_honest_goes_live(self):
        config, transport, registry, instance, rng = build_bootstrap_world()
        report = bootstrap_service(instance, transport, registry, config, rng)
        assert report.live
        assert len(report.links) == len(instance.peers) - 1
        assert all(
            link.outcome is HandoverOutcome.AUTHENTICATED for link in report.links
        )
        assert report.abstained == ()
        assert report.failing_link is None

    def test_corrupted_chain_member_abstains(self):
        config, transport, registry, instance, rng = build_bootstrap_world(
            corrupt_member=True
        )
        report = bootstrap_service(instance, transport, registry, config, rng)
        assert not report.live
        assert report.abstained == (instance.peers[1].pubkey,)

    def test_wrong_key_member_breaks_link(self):
        config, transport, registry, instance, rng = build_bootstrap_world(
            wrong_key_member=True
        )
        report = bootstrap_service(instance, transport, registry, config, rng)
        wrong = KeyPair.from_seed((0).to_bytes(8, "big")).public_bytes
        if any(link.target == wrong for link in report.links):
            assert not report.live
            failing = report.failing_link
            assert failing is not None and failing.target == wrong
            assert failing.outcome is HandoverOutcome.KEY_MISMATCH

    def test_expired_instance_rejected(self):
        config, transport, registry, instance, rng = build_bootstrap_world()
        stale = replace(instance, ttl_remaining=0)
        with pytest.raises(StaleInstanceError):
            bootstrap_service(stale, transport, registry, config, rng)

    def test_election_replay_equality(self):
        # Every honest member's replay equals the instance derived here.
        config, transport, registry, instance, rng = build_bootstrap_world()
        for record in instance.peers:
            peer = registry[record.pubkey]
            replayed = derive_state(peer.chain, 0, config)
            (replayed_instance,) = replayed.services
            assert replayed_instance.consensus_key() == instance.consensus_key()
