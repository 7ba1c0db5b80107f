"""Proof of work binding a peer advertisement to its identity and pulse block.

The puzzle preimage is the 73-byte concatenation

    connector_pubkey (33) || pulse_block_hash (32) || nonce (8)

and a nonce solves the puzzle when the scheme digest of the preimage has at
least ``difficulty_bits`` leading zero bits (digest read most-significant
byte first). The default scheme is HASH256 (double SHA-256); alternative
schemes (e.g. memory-hard ones) can be registered under their own ids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import _kernels as kernels
from .errors import BudgetExhausted, InvalidField, UnknownScheme

DEFAULT_SCHEME = "hash256"
DEFAULT_MAX_ATTEMPTS = 1 << 24

_SCHEMES: dict[str, Callable[[bytes], bytes]] = {}


def register_scheme(scheme_id: str, digest: Callable[[bytes], bytes]) -> None:
    """Register a puzzle digest function under a scheme identifier."""
    _SCHEMES[scheme_id] = digest


def scheme_digest(scheme_id: str) -> Callable[[bytes], bytes]:
    try:
        return _SCHEMES[scheme_id]
    except KeyError:
        raise UnknownScheme(f"no PoW scheme registered under {scheme_id!r}") from None


register_scheme(DEFAULT_SCHEME, kernels.hash256)


@dataclass(frozen=True)
class PowParams:
    difficulty_bits: int
    scheme_id: str = DEFAULT_SCHEME

    def __post_init__(self):
        if not 0 <= self.difficulty_bits <= 256:
            raise InvalidField("difficulty_bits must be within [0, 256]")


@dataclass(frozen=True)
class PowInput:
    connector_pubkey: bytes
    pulse_block_hash: bytes
    nonce: bytes

    def preimage(self) -> bytes:
        if len(self.connector_pubkey) != 33:
            raise InvalidField("connector pubkey must be 33 bytes")
        if len(self.pulse_block_hash) != 32:
            raise InvalidField("pulse block hash must be 32 bytes")
        if len(self.nonce) != 8:
            raise InvalidField("nonce must be 8 bytes")
        return self.connector_pubkey + self.pulse_block_hash + self.nonce


def leading_zero_bits(digest: bytes) -> int:
    """Leading zero bits of a digest, most-significant byte first."""
    return kernels.leading_zero_bits(digest)


def pow_verify(pow_input: PowInput, params: PowParams) -> bool:
    """True iff the scheme digest of the preimage meets the difficulty."""
    digest = scheme_digest(params.scheme_id)(pow_input.preimage())
    return kernels.leading_zero_bits(digest) >= params.difficulty_bits


def pow_solve(
    connector_pubkey: bytes,
    pulse_block_hash: bytes,
    params: PowParams,
    start_nonce: bytes = b"\x00" * 8,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> bytes:
    """Scan nonces sequentially from start_nonce (wrapping mod 2^64).

    Deterministic: identical inputs always yield the identical nonce. Raises
    BudgetExhausted after max_attempts candidates.
    """
    if len(start_nonce) != 8:
        raise InvalidField("start nonce must be 8 bytes")
    prefix = PowInput(connector_pubkey, pulse_block_hash, start_nonce).preimage()[:-8]
    start = int.from_bytes(start_nonce, "big")
    if params.scheme_id == DEFAULT_SCHEME:
        found = kernels.pow_scan(prefix, start, params.difficulty_bits, max_attempts)
    else:
        found = _generic_scan(
            scheme_digest(params.scheme_id),
            prefix,
            start,
            params.difficulty_bits,
            max_attempts,
        )
    if found is None:
        raise BudgetExhausted(
            f"no nonce at difficulty {params.difficulty_bits} within "
            f"{max_attempts} attempts"
        )
    return found.to_bytes(8, "big")


def solve_attempts(start_nonce: bytes, solution: bytes) -> int:
    """Number of candidates a sequential scan tried to reach the solution."""
    start = int.from_bytes(start_nonce, "big")
    end = int.from_bytes(solution, "big")
    return (end - start) % (1 << 64) + 1


def _generic_scan(
    digest: Callable[[bytes], bytes],
    prefix: bytes,
    start: int,
    bits: int,
    max_attempts: int,
) -> int | None:
    nonce = start & ((1 << 64) - 1)
    for _ in range(max_attempts):
        if kernels.leading_zero_bits(digest(prefix + nonce.to_bytes(8, "big"))) >= bits:
            return nonce
        nonce = (nonce + 1) & ((1 << 64) - 1)
    return None
