"""Pure-Python kernels (hashlib-backed reference implementation).

These are the portable counterparts of the compiled kernels in ``_native``;
both backends must produce byte-identical results for every function here.
"""

import hashlib

NAME = "pure"

_U64_MAX = (1 << 64) - 1


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hash256(data: bytes) -> bytes:
    """Double SHA-256 (Bitcoin-style HASH256)."""
    return hashlib.sha256(hashlib.sha256(data).digest()).digest()


def prng_block(seed: bytes, index: int) -> bytes:
    """Block ``index`` of the deterministic stream: SHA256(seed || index_be64)."""
    if len(seed) != 32:
        raise ValueError("seed must be 32 bytes")
    return hashlib.sha256(seed + index.to_bytes(8, "big")).digest()


def leading_zero_bits(digest: bytes) -> int:
    value = int.from_bytes(digest, "big")
    return 8 * len(digest) - value.bit_length()


class _Stream:
    """Sequential 64-bit reader over the SHA-256 counter-mode stream."""

    __slots__ = ("_seed", "_counter", "_block", "_offset")

    def __init__(self, seed: bytes):
        self._seed = seed
        self._counter = 0
        self._block = b""
        self._offset = 32

    def next_u64(self) -> int:
        if self._offset >= 32:
            self._block = hashlib.sha256(
                self._seed + self._counter.to_bytes(8, "big")
            ).digest()
            self._counter += 1
            self._offset = 0
        value = int.from_bytes(self._block[self._offset : self._offset + 8], "big")
        self._offset += 8
        return value

    def randbelow(self, n: int) -> int:
        # Rejection sampling: retry while the chunk falls in the biased tail
        # above floor(2^64 / n) * n.
        limit = ((1 << 64) // n) * n
        while True:
            value = self.next_u64()
            if value < limit:
                return value % n


def shuffle_indices(seed: bytes, n: int) -> list[int]:
    """Full Fisher-Yates shuffle of range(n), last index down."""
    return shuffle_prefix(seed, n, n)


def shuffle_prefix(seed: bytes, n: int, k: int) -> list[int]:
    """First ``k`` entries of the full Fisher-Yates shuffle of range(n)."""
    if len(seed) != 32:
        raise ValueError("seed must be 32 bytes")
    if not 0 <= k <= n:
        raise ValueError(f"k={k} out of range for n={n}")
    stream = _Stream(seed)
    arr = list(range(n))
    for i in range(n - 1, 0, -1):
        j = stream.randbelow(i + 1)
        arr[i], arr[j] = arr[j], arr[i]
    return arr[:k]


def sample_indices(seed: bytes, n: int, k: int) -> list[int]:
    """Shortcut sampler: k distinct indices via a partial front shuffle.

    Draws only k chunks from the stream instead of n-1, so it is not
    committee-compatible with shuffle_prefix, only distribution-compatible.
    """
    if len(seed) != 32:
        raise ValueError("seed must be 32 bytes")
    if not 0 <= k <= n:
        raise ValueError(f"k={k} out of range for n={n}")
    stream = _Stream(seed)
    arr = list(range(n))
    for i in range(k):
        j = i + stream.randbelow(n - i)
        arr[i], arr[j] = arr[j], arr[i]
    return arr[:k]


def pow_scan(
    prefix: bytes, start_nonce: int, difficulty_bits: int, max_attempts: int
) -> int | None:
    """Scan nonces sequentially from start_nonce (wrapping mod 2^64).

    Returns the first nonce for which HASH256(prefix || nonce_be64) has at
    least difficulty_bits leading zero bits, or None if max_attempts is
    exhausted.
    """
    nonce = start_nonce & _U64_MAX
    for _ in range(max_attempts):
        digest = hash256(prefix + nonce.to_bytes(8, "big"))
        if leading_zero_bits(digest) >= difficulty_bits:
            return nonce
        nonce = (nonce + 1) & _U64_MAX
    return None


def infiltration_cell(
    cell_seed: bytes,
    trials: int,
    n_total: int,
    k: int,
    adv_count: int,
    threshold_count: int,
    threads: int = 0,
) -> int:
    """Count infiltrated trials for one Monte Carlo cell.

    Per trial: derive a trial seed from (cell_seed, trial index), draw a
    synthetic spawn-block entropy value and one request nonce from its
    stream, derive the election seed SHA256(entropy || SHA256(nonce)), run
    the full committee shuffle, and check whether at least threshold_count
    of the first k indices fall below adv_count (adversarial peers occupy
    the lowest indices).
    """
    del threads  # single-threaded fallback
    infiltrated = 0
    for trial in range(trials):
        trial_seed = sha256(cell_seed + trial.to_bytes(8, "big"))
        entropy = prng_block(trial_seed, 0)
        nonce = prng_block(trial_seed, 1)[:8]
        seed = sha256(entropy + sha256(nonce))
        committee = shuffle_prefix(seed, n_total, k)
        hits = sum(1 for idx in committee if idx < adv_count)
        if hits >= threshold_count:
            infiltrated += 1
    return infiltrated
