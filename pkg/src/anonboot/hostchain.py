"""Deterministic simulated host blockchain.

Blocks are weight-limited (4 MWU like post-SegWit Bitcoin) and carry opaque
transactions; protocol messages enter through a FIFO queue and each mined
block includes them in order up to the configured per-block capacity. There
is no host-chain proof of work and no forks: block ids are plain hashes and
the chain is strictly append-only. A fork can be *signalled* so that state
derivation aborts, which is the documented error path for reorganizations.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from ._kernels import hash256
from .errors import ConfigError, OutOfRange
from .wire import OpReturnScript

MAX_BLOCK_WEIGHT = 4_000_000
MESSAGE_WEIGHT = 901
GENESIS_PREV_HASH = b"\x00" * 32
EMPTY_MERKLE_ROOT = b"\x00" * 32

_FILLER_SCRIPT = b"filler"


@dataclass(frozen=True)
class ChainConfig:
    max_block_weight: int = MAX_BLOCK_WEIGHT
    message_weight: int = MESSAGE_WEIGHT
    capacity: Fraction | float = 1.0
    filler_ratio: float = 0.0
    filler_weight: int = 560

    def __post_init__(self):
        if self.max_block_weight < 1 or self.message_weight < 1:
            raise ConfigError("block and message weights must be >= 1")
        if not 0 < Fraction(self.capacity) <= 1:
            raise ConfigError("capacity must lie in (0, 1]")
        if not 0 <= self.filler_ratio <= 1:
            raise ConfigError("filler_ratio must lie in [0, 1]")
        if self.filler_weight < 1:
            raise ConfigError("filler_weight must be >= 1")

    @property
    def message_budget(self) -> int:
        """Per-block weight budget for protocol messages."""
        return int(Fraction(self.capacity) * self.max_block_weight)

    @property
    def messages_per_block(self) -> int:
        return self.message_budget // self.message_weight


@dataclass(frozen=True)
class Transaction:
    txid: bytes
    script: bytes
    weight: int
    counter: int

    @classmethod
    def create(cls, script: bytes, weight: int, counter: int) -> "Transaction":
        # The creation counter keeps txids of identical payloads distinct,
        # standing in for Bitcoin's differing inputs.
        txid = hash256(script + counter.to_bytes(8, "big"))
        return cls(txid=txid, script=script, weight=weight, counter=counter)

    @property
    def is_filler(self) -> bool:
        return self.script == _FILLER_SCRIPT


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    merkle_root: bytes
    txs: tuple[Transaction, ...]
    block_hash: bytes

    @classmethod
    def create(
        cls, height: int, prev_hash: bytes, txs: tuple[Transaction, ...]
    ) -> "Block":
        root = merkle_root([tx.txid for tx in txs])
        block_hash = compute_block_hash(height, prev_hash, root)
        return cls(height, prev_hash, root, txs, block_hash)

    @property
    def total_weight(self) -> int:
        return sum(tx.weight for tx in self.txs)


def compute_block_hash(height: int, prev_hash: bytes, root: bytes) -> bytes:
    return hash256(height.to_bytes(8, "big") + prev_hash + root)


def merkle_root(txids: list[bytes]) -> bytes:
    """Binary Merkle root over txids; odd levels duplicate the last node."""
    if not txids:
        return EMPTY_MERKLE_ROOT
    level = list(txids)
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [
            hash256(level[i] + level[i + 1]) for i in range(0, len(level), 2)
        ]
    return level[0]


def extract_entropy(block: Block) -> bytes:
    """Entropy drawn from a block: its Merkle root."""
    return block.merkle_root


class HostChain:
    """Single-writer append-only chain with a pending message queue."""

    def __init__(self, config: ChainConfig | None = None, genesis: bool = True):
        self.config = config or ChainConfig()
        self._blocks: list[Block] = []
        self._pending: deque[bytes] = deque()
        self._tx_counter = 0
        self._fork_height: int | None = None
        if genesis:
            self.mine_block()

    def __len__(self) -> int:
        return len(self._blocks)

    @property
    def height(self) -> int:
        if not self._blocks:
            raise OutOfRange("chain is empty")
        return self._blocks[-1].height

    @property
    def pending_count(self) -> int:
        return len(self._pending)

    @property
    def fork_height(self) -> int | None:
        return self._fork_height

    def tip(self) -> Block:
        if not self._blocks:
            raise OutOfRange("chain is empty")
        return self._blocks[-1]

    def get_block(self, height: int) -> Block:
        if not 0 <= height < len(self._blocks):
            raise OutOfRange(f"height {height} outside [0, {len(self._blocks) - 1}]")
        return self._blocks[height]

    def enqueue_message(self, script: OpReturnScript | bytes) -> None:
        """Queue one protocol message for inclusion in upcoming blocks."""
        raw = bytes(script) if isinstance(script, OpReturnScript) else bytes(script)
        self._pending.append(raw)

    def mine_block(self) -> Block:
        """Mine the next block: queued messages in order up to capacity,
        then optional filler. Messages that do not fit stay queued."""
        cfg = self.config
        txs: list[Transaction] = []
        used = 0
        budget = cfg.message_budget
        while self._pending and used + cfg.message_weight <= budget:
            script = self._pending.popleft()
            txs.append(Transaction.create(script, cfg.message_weight, self._tx_counter))
            used += cfg.message_weight
            self._tx_counter += 1
        if cfg.filler_ratio > 0:
            remaining = cfg.max_block_weight - used
            filler_count = int(remaining * cfg.filler_ratio) // cfg.filler_weight
            for _ in range(filler_count):
                txs.append(
                    Transaction.create(
                        _FILLER_SCRIPT, cfg.filler_weight, self._tx_counter
                    )
                )
                self._tx_counter += 1
        if self._blocks:
            height = self._blocks[-1].height + 1
            prev_hash = self._blocks[-1].block_hash
        else:
            height = 0
            prev_hash = GENESIS_PREV_HASH
        block = Block.create(height, prev_hash, tuple(txs))
        assert block.total_weight <= cfg.max_block_weight
        self._blocks.append(block)
        return block

    def mine_until_drained(self) -> int:
        """Mine until the message queue is empty; returns blocks mined."""
        mined = 0
        while self._pending:
            self.mine_block()
            mined += 1
        return mined

    def mark_fork(self, height: int) -> None:
        """Signal that a fork discarded blocks from ``height`` on.

        Reorganizations are not simulated; derivations overlapping the
        marked height raise ForkDetected until clear_fork() is called.
        """
        self._fork_height = height

    def clear_fork(self) -> None:
        self._fork_height = None

    def verify(self) -> None:
        """Full-scan integrity check of hash linkage and capacity."""
        prev = GENESIS_PREV_HASH
        for expected_height, block in enumerate(self._blocks):
            if block.height != expected_height or block.prev_hash != prev:
                raise OutOfRange(f"broken linkage at height {expected_height}")
            root = merkle_root([tx.txid for tx in block.txs])
            if root != block.merkle_root:
                raise OutOfRange(f"bad merkle root at height {expected_height}")
            if block.block_hash != compute_block_hash(block.height, prev, root):
                raise OutOfRange(f"bad block hash at height {expected_height}")
            prev = block.block_hash

    # One block per line: height, hex hashes, then comma-separated
    # counter:weight:script_hex transaction records.
    def export_lines(self) -> str:
        lines = []
        for block in self._blocks:
            txs = ",".join(
                f"{tx.counter}:{tx.weight}:{tx.script.hex()}" for tx in block.txs
            )
            lines.append(
                f"{block.height}|{block.prev_hash.hex()}|"
                f"{block.merkle_root.hex()}|{block.block_hash.hex()}|{txs}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def import_lines(
        cls, text: str, config: ChainConfig | None = None
    ) -> "HostChain":
        chain = cls(config=config, genesis=False)
        max_counter = -1
        for line in text.splitlines():
            if not line.strip():
                continue
            height_s, prev_hex, root_hex, hash_hex, txs_s = line.split("|")
            txs = []
            if txs_s:
                for record in txs_s.split(","):
                    counter_s, weight_s, script_hex = record.split(":")
                    tx = Transaction.create(
                        bytes.fromhex(script_hex), int(weight_s), int(counter_s)
                    )
                    max_counter = max(max_counter, int(counter_s))
                    txs.append(tx)
            block = Block.create(
                int(height_s), bytes.fromhex(prev_hex), tuple(txs)
            )
            if (
                block.merkle_root != bytes.fromhex(root_hex)
                or block.block_hash != bytes.fromhex(hash_hex)
            ):
                raise OutOfRange(f"hash mismatch importing height {height_s}")
            chain._blocks.append(block)
        chain._tx_counter = max_counter + 1
        chain.verify()
        return chain
