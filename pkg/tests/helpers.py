"""Shared object builders and a randomized multi-pulse chain generator."""

from __future__ import annotations

import hashlib
import random
from dataclasses import replace
from fractions import Fraction

from anonboot.hostchain import ChainConfig, HostChain
from anonboot.pow import PowParams, pow_solve
from anonboot.pulse import PulseConfig, pulse_block_height, spawn_block_height
from anonboot.wire import (
    PeerAdvertisement,
    ServiceRequest,
    encode_address,
    encode_peer_advertisement,
    encode_service_request,
    peer_capabilities,
    request_capabilities,
)


def make_pubkey(tag: int | bytes) -> bytes:
    if isinstance(tag, int):
        tag = tag.to_bytes(8, "big")
    return b"\x02" + hashlib.sha256(tag).digest()


def make_ad(tag: int = 0, **overrides) -> PeerAdvertisement:
    address, _ = encode_address("10.0.0.1")
    fields = dict(
        connector_pubkey=make_pubkey(tag),
        address=address,
        port=9000 + (tag % 1000 if isinstance(tag, int) else 0),
        service_id=1,
        capabilities=peer_capabilities(b"\x05"),
        nonce=bytes(8),
    )
    fields.update(overrides)
    return PeerAdvertisement(**fields)


def make_request(service_id: int = 1, k: int = 2, nonce: bytes = b"\x07" * 8,
                 extra: bytes = b"") -> ServiceRequest:
    return ServiceRequest(
        service_id=service_id,
        capabilities=request_capabilities(k, extra),
        nonce=nonce,
    )


def solved_ad(tag: int, pulse_block_hash: bytes, params: PowParams,
              **overrides) -> PeerAdvertisement:
    ad = make_ad(tag, **overrides)
    nonce = pow_solve(ad.connector_pubkey, pulse_block_hash, params)
    return replace(ad, nonce=nonce)


def build_random_scenario(seed: int, pulses: int | None = None):
    """A randomized multi-pulse chain with valid, stale, late, duplicate,
    and malformed traffic. Returns (chain, config, pulse_count)."""
    rng = random.Random(seed)
    pulse_length = rng.randint(6, 12)
    negotiation_length = rng.randint(1, min(4, pulse_length - 2))
    params = PowParams(rng.choice([0, 2, 4]))
    config = PulseConfig(
        pulse_length=pulse_length,
        negotiation_length=negotiation_length,
        pow_params=params,
        service_ttl=rng.randint(1, 3),
    )
    chain = HostChain(ChainConfig(capacity=Fraction(rng.choice(["1/4", "1/2", "1"]))))
    pulse_count = pulses if pulses is not None else rng.randint(1, 4)
    peer_tags = [seed * 1000 + i for i in range(rng.randint(2, 8))]

    for pulse_index in range(pulse_count):
        pulse_hash = chain.get_block(
            pulse_block_height(pulse_index, config)
        ).block_hash
        for tag in peer_tags:
            if rng.random() < 0.85:
                service_id = rng.choice([1, 2])
                level = rng.choice([1, 5])
                ad = solved_ad(
                    tag, pulse_hash, params,
                    service_id=service_id,
                    capabilities=peer_capabilities(bytes([level])),
                )
                chain.enqueue_message(encode_peer_advertisement(ad))
                if rng.random() < 0.15:  # duplicate from the same identity
                    chain.enqueue_message(encode_peer_advertisement(ad))
        if pulse_index > 0 and rng.random() < 0.5:
            stale_hash = chain.get_block(
                pulse_block_height(pulse_index - 1, config)
            ).block_hash
            stale = solved_ad(seed * 1000 + 900, stale_hash, params)
            chain.enqueue_message(encode_peer_advertisement(stale))
        if rng.random() < 0.5:  # garbage PoW -> malformed unless difficulty 0
            bogus = make_ad(seed * 1000 + 901, nonce=rng.randbytes(8))
            chain.enqueue_message(encode_peer_advertisement(bogus))
        for _ in range(rng.randint(0, 3)):
            request = make_request(
                service_id=rng.choice([1, 2]),
                k=rng.randint(1, 4),
                nonce=rng.randbytes(8),
                extra=bytes([rng.choice([0, 1])]),
            )
            chain.enqueue_message(encode_service_request(request))

        for _ in range(negotiation_length):
            chain.mine_block()
        if rng.random() < 0.6:  # late advertisement lands at the spawn block
            late = solved_ad(seed * 1000 + 902, pulse_hash, params)
            chain.enqueue_message(encode_peer_advertisement(late))
        while chain.height < spawn_block_height(pulse_index, config):
            chain.mine_block()
        while chain.height < pulse_block_height(pulse_index + 1, config):
            chain.mine_block()
    return chain, config, pulse_count
