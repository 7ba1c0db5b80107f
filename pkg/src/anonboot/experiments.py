"""Robustness, footprint, and fee-cost experiments with CSV output.

The infiltration study measures how often an adversary controlling a share
f_R of an N-peer repository ends up controlling at least a share t_I of an
n-peer elected committee. Every Monte Carlo trial runs the real election
path (fresh synthetic spawn entropy + one request nonce -> seed -> full
committee shuffle); the exact expectation is the hypergeometric tail
P[X >= ceil(t_I * n)], X ~ Hypergeom(N, K, n), computed in exact integer
arithmetic as the oracle. The robustness measure reported per cell is
1 - infiltration rate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import IO, Iterable, Sequence

from . import _kernels as kernels
from .errors import ConfigError
from .hostchain import MAX_BLOCK_WEIGHT, MESSAGE_WEIGHT, ChainConfig, HostChain
from .wire import (
    OpReturnScript,
    PeerAdvertisement,
    encode_address,
    encode_peer_advertisement,
    peer_capabilities,
)


def _default_fractions() -> tuple[Fraction, ...]:
    fractions = [Fraction(i, 20) for i in range(11)]  # 0.00 .. 0.50 step 0.05
    fractions.append(Fraction(1, 3))
    return tuple(sorted(fractions))


DEFAULT_NETWORK_SIZES = (4, 16, 31, 100)
DEFAULT_CAPACITIES = tuple(
    Fraction(s) for s in ("0.05", "0.10", "0.25", "0.50", "1.00")
)
DEFAULT_MESSAGE_COUNTS = tuple(range(0, 10_001, 1_000))


@dataclass(frozen=True)
class InfiltrationConfig:
    repository_size: int = 1000
    adversary_fractions: tuple[Fraction, ...] = field(
        default_factory=_default_fractions
    )
    network_sizes: tuple[int, ...] = DEFAULT_NETWORK_SIZES
    trials: int = 100_000
    infiltration_threshold: Fraction = Fraction(1, 3)
    threshold_mode: str = "ceil"
    master_seed: int = 0
    shortcut: bool = False
    threads: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if any(not 0 <= f <= 1 for f in self.adversary_fractions):
            raise ConfigError("adversary fractions must lie in [0, 1]")
        if any(n > self.repository_size for n in self.network_sizes):
            raise ConfigError("network sizes cannot exceed the repository size")
        if self.threshold_mode not in ("ceil", "floor"):
            raise ConfigError("threshold_mode must be 'ceil' or 'floor'")


@dataclass(frozen=True)
class RobustnessRow:
    adversary_fraction: Fraction
    network_size: int
    threshold_count: int
    trials: int
    infiltrated: int
    rate: float
    exact_rate: float
    robustness: float


def threshold_count(threshold: Fraction, network_size: int, mode: str) -> int:
    """Committee members the adversary needs: ceil(t_I*n) or floor(t_I*n)."""
    exact = Fraction(threshold) * network_size
    if mode == "ceil":
        return math.ceil(exact)
    if mode == "floor":
        return math.floor(exact)
    raise ConfigError("threshold_mode must be 'ceil' or 'floor'")


def hypergeom_tail(total: int, tagged: int, draws: int, at_least: int) -> Fraction:
    """Exact P[X >= at_least] for X ~ Hypergeom(total, tagged, draws)."""
    if at_least <= 0:
        return Fraction(1)
    upper = min(tagged, draws)
    if at_least > upper:
        return Fraction(0)
    numerator = sum(
        math.comb(tagged, hits) * math.comb(total - tagged, draws - hits)
        for hits in range(at_least, upper + 1)
    )
    return Fraction(numerator, math.comb(total, draws))


def infiltration_cell_seed(master_seed: int, adv_count: int, network_size: int) -> bytes:
    return kernels.sha256(
        master_seed.to_bytes(8, "big")
        + b"infiltration"
        + adv_count.to_bytes(4, "big")
        + network_size.to_bytes(4, "big")
    )


def trial_election_seed(cell_seed: bytes, trial: int) -> bytes:
    """Election seed of one trial: synthetic spawn entropy + request nonce.

    The trial's stream is keyed by (cell seed, trial index) so trials are
    independent and aggregation is order-independent across workers.
    """
    trial_seed = kernels.sha256(cell_seed + trial.to_bytes(8, "big"))
    entropy = kernels.prng_block(trial_seed, 0)
    nonce = kernels.prng_block(trial_seed, 1)[:8]
    return kernels.sha256(entropy + kernels.sha256(nonce))


def _run_cell_shortcut(
    cell_seed: bytes, trials: int, repository_size: int, network_size: int,
    adv_count: int, needed: int,
) -> int:
    infiltrated = 0
    for trial in range(trials):
        seed = trial_election_seed(cell_seed, trial)
        committee = kernels.sample_indices(seed, repository_size, network_size)
        hits = sum(1 for index in committee if index < adv_count)
        if hits >= needed:
            infiltrated += 1
    return infiltrated


def run_infiltration(config: InfiltrationConfig) -> list[RobustnessRow]:
    """Monte Carlo infiltration rates with exact hypergeometric expectations."""
    rows = []
    repository_size = config.repository_size
    for fraction in config.adversary_fractions:
        adv_count = round(Fraction(fraction) * repository_size)
        for network_size in config.network_sizes:
            needed = threshold_count(
                config.infiltration_threshold, network_size, config.threshold_mode
            )
            cell_seed = infiltration_cell_seed(
                config.master_seed, adv_count, network_size
            )
            if config.shortcut:
                infiltrated = _run_cell_shortcut(
                    cell_seed, config.trials, repository_size, network_size,
                    adv_count, needed,
                )
            else:
                infiltrated = kernels.infiltration_cell(
                    cell_seed, config.trials, repository_size, network_size,
                    adv_count, needed, config.threads,
                )
            exact = hypergeom_tail(repository_size, adv_count, network_size, needed)
            rate = infiltrated / config.trials
            rows.append(
                RobustnessRow(
                    adversary_fraction=fraction,
                    network_size=network_size,
                    threshold_count=needed,
                    trials=config.trials,
                    infiltrated=infiltrated,
                    rate=rate,
                    exact_rate=float(exact),
                    robustness=1.0 - rate,
                )
            )
    return rows


def infiltration_csv(rows: Iterable[RobustnessRow], out: IO[str]) -> None:
    writer = csv.writer(out)
    writer.writerow(
        [
            "f_R", "n", "threshold_count", "trials", "infiltrated",
            "rate", "exact_rate", "robustness",
        ]
    )
    for row in rows:
        writer.writerow(
            [
                f"{float(row.adversary_fraction):.6f}",
                row.network_size,
                row.threshold_count,
                row.trials,
                row.infiltrated,
                f"{row.rate:.6f}",
                f"{row.exact_rate:.6g}",
                f"{row.robustness:.6f}",
            ]
        )


@dataclass(frozen=True)
class FootprintRow:
    capacity: Fraction
    messages: int
    blocks: int


def _template_script() -> OpReturnScript:
    address, _ = encode_address("10.0.0.1")
    ad = PeerAdvertisement(
        connector_pubkey=b"\x02" + bytes(32),
        address=address,
        port=9000,
        service_id=1,
        capabilities=peer_capabilities(),
        nonce=bytes(8),
    )
    return encode_peer_advertisement(ad)


def run_footprint(
    message_counts: Sequence[int] = DEFAULT_MESSAGE_COUNTS,
    capacities: Sequence[Fraction] = DEFAULT_CAPACITIES,
    max_block_weight: int = MAX_BLOCK_WEIGHT,
    message_weight: int = MESSAGE_WEIGHT,
) -> list[FootprintRow]:
    """Blocks needed to drain a per-pulse message burst (minimal L_N)."""
    template = bytes(_template_script())
    rows = []
    for capacity in capacities:
        config = ChainConfig(
            max_block_weight=max_block_weight,
            message_weight=message_weight,
            capacity=capacity,
        )
        for count in message_counts:
            chain = HostChain(config)
            for _ in range(count):
                chain.enqueue_message(template)
            blocks = chain.mine_until_drained()
            rows.append(FootprintRow(Fraction(capacity), count, blocks))
    return rows


def footprint_csv(rows: Iterable[FootprintRow], out: IO[str]) -> None:
    writer = csv.writer(out)
    writer.writerow(["capacity", "messages", "blocks"])
    for row in rows:
        writer.writerow([f"{float(row.capacity):.4f}", row.messages, row.blocks])


@dataclass(frozen=True)
class CostEstimate:
    fee_sat: int
    fee_usd: Decimal
    fee_usd_exact: Decimal


def estimate_cost(
    tx_size_bytes: int, fee_rate_sat_per_byte: int, btc_price_usd: float | str
) -> CostEstimate:
    """Fee of one on-chain message: exact satoshi, USD rounded to cents."""
    if tx_size_bytes < 0 or fee_rate_sat_per_byte < 0:
        raise ConfigError("size and fee rate must be >= 0")
    fee_sat = tx_size_bytes * fee_rate_sat_per_byte
    price = Decimal(str(btc_price_usd))
    if price < 0:
        raise ConfigError("price must be >= 0")
    exact = Decimal(fee_sat) * price / Decimal(10**8)
    return CostEstimate(
        fee_sat=fee_sat,
        fee_usd=exact.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP),
        fee_usd_exact=exact,
    )
