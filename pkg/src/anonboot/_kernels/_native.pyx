# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: SHA-256 counter-mode stream, committee shuffles, PoW scan.

Byte-for-byte compatible with anonboot._kernels.pure; OpenSSL provides the
SHA-256 primitive (hardware dispatch where available) and the Monte Carlo
cell loop runs trials in parallel via OpenMP.
"""

from libc.stdlib cimport free, malloc
from libc.string cimport memcpy
from libc.stdint cimport uint8_t, uint64_t

from cython.parallel cimport prange

cdef extern from "openssl/sha.h" nogil:
    ctypedef struct SHA256_CTX:
        pass
    int SHA256_Init(SHA256_CTX *c)
    int SHA256_Update(SHA256_CTX *c, const void *data, size_t n)
    int SHA256_Final(unsigned char *md, SHA256_CTX *c)

NAME = "native"

cdef uint64_t U64_MAX = <uint64_t> 0xFFFFFFFFFFFFFFFFUL


# Stack-context digest: avoids OpenSSL 3.x per-call provider fetch (and the
# cross-thread lock contention it causes) in the one-shot SHA256() wrapper.
cdef inline void _sha256(const uint8_t *data, size_t n, uint8_t *out) noexcept nogil:
    cdef SHA256_CTX ctx
    SHA256_Init(&ctx)
    SHA256_Update(&ctx, data, n)
    SHA256_Final(out, &ctx)


cdef inline void _store_be64(uint8_t *dst, uint64_t value) noexcept nogil:
    cdef int i
    for i in range(8):
        dst[i] = <uint8_t> ((value >> (56 - 8 * i)) & 0xFF)


cdef inline uint64_t _load_be64(const uint8_t *src) noexcept nogil:
    cdef uint64_t value = 0
    cdef int i
    for i in range(8):
        value = (value << 8) | src[i]
    return value


cdef inline int _leading_zero_bits(const uint8_t *digest, int length) noexcept nogil:
    cdef int bits = 0
    cdef int i, b
    for i in range(length):
        if digest[i] == 0:
            bits += 8
            continue
        b = digest[i]
        while (b & 0x80) == 0:
            bits += 1
            b = (b << 1) & 0xFF
        return bits
    return bits


# Sequential 64-bit reader over SHA256(seed || counter_be64) blocks.
cdef struct Stream:
    uint8_t material[40]  # seed (32) || counter (8)
    uint8_t block[32]
    uint64_t counter
    int offset


cdef inline void _stream_init(Stream *s, const uint8_t *seed) noexcept nogil:
    memcpy(s.material, seed, 32)
    s.counter = 0
    s.offset = 32


cdef inline uint64_t _stream_next_u64(Stream *s) noexcept nogil:
    cdef uint64_t value
    if s.offset >= 32:
        _store_be64(s.material + 32, s.counter)
        _sha256(s.material, 40, s.block)
        s.counter += 1
        s.offset = 0
    value = _load_be64(s.block + s.offset)
    s.offset += 8
    return value


cdef inline uint64_t _stream_randbelow(Stream *s, uint64_t n) noexcept nogil:
    # Accept x iff x < floor(2^64 / n) * n, i.e. x <= U64_MAX - (2^64 mod n).
    cdef uint64_t limit = U64_MAX - ((U64_MAX % n + 1) % n)
    cdef uint64_t value
    while True:
        value = _stream_next_u64(s)
        if value <= limit:
            return value % n


cdef inline void _fisher_yates(Stream *s, int *arr, int n) noexcept nogil:
    cdef int i, j, tmp
    for i in range(n - 1, 0, -1):
        j = <int> _stream_randbelow(s, <uint64_t> (i + 1))
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp


def sha256(data: bytes) -> bytes:
    cdef uint8_t digest[32]
    _sha256(data, len(data), digest)
    return bytes(digest[:32])


def hash256(data: bytes) -> bytes:
    cdef uint8_t first[32]
    cdef uint8_t second[32]
    _sha256(data, len(data), first)
    _sha256(first, 32, second)
    return bytes(second[:32])


def prng_block(seed: bytes, index: int) -> bytes:
    if len(seed) != 32:
        raise ValueError("seed must be 32 bytes")
    cdef uint8_t material[40]
    cdef uint8_t digest[32]
    memcpy(material, <const uint8_t *> seed, 32)
    _store_be64(material + 32, <uint64_t> index)
    _sha256(material, 40, digest)
    return bytes(digest[:32])


def leading_zero_bits(digest: bytes) -> int:
    return _leading_zero_bits(digest, len(digest))


def shuffle_indices(seed: bytes, n: int) -> list:
    return shuffle_prefix(seed, n, n)


def shuffle_prefix(seed: bytes, n: int, k: int) -> list:
    if len(seed) != 32:
        raise ValueError("seed must be 32 bytes")
    if not 0 <= k <= n:
        raise ValueError(f"k={k} out of range for n={n}")
    if n == 0:
        return []
    cdef int cn = n
    cdef int ck = k
    cdef const uint8_t *seed_ptr = <const uint8_t *> seed
    cdef int *arr = <int *> malloc(cn * sizeof(int))
    if arr == NULL:
        raise MemoryError()
    cdef Stream s
    cdef int i
    try:
        with nogil:
            for i in range(cn):
                arr[i] = i
            _stream_init(&s, seed_ptr)
            _fisher_yates(&s, arr, cn)
        return [arr[i] for i in range(ck)]
    finally:
        free(arr)


def sample_indices(seed: bytes, n: int, k: int) -> list:
    if len(seed) != 32:
        raise ValueError("seed must be 32 bytes")
    if not 0 <= k <= n:
        raise ValueError(f"k={k} out of range for n={n}")
    if n == 0:
        return []
    cdef int cn = n
    cdef int ck = k
    cdef const uint8_t *seed_ptr = <const uint8_t *> seed
    cdef int *arr = <int *> malloc(cn * sizeof(int))
    if arr == NULL:
        raise MemoryError()
    cdef Stream s
    cdef int i, j, tmp
    try:
        with nogil:
            for i in range(cn):
                arr[i] = i
            _stream_init(&s, seed_ptr)
            for i in range(ck):
                j = i + <int> _stream_randbelow(&s, <uint64_t> (cn - i))
                tmp = arr[i]
                arr[i] = arr[j]
                arr[j] = tmp
        return [arr[i] for i in range(ck)]
    finally:
        free(arr)


def pow_scan(prefix: bytes, start_nonce: int, difficulty_bits: int, max_attempts: int):
    cdef Py_ssize_t prefix_len = len(prefix)
    if prefix_len > 192:
        raise ValueError("prefix too long")
    cdef uint8_t buf[200]
    cdef uint8_t first[32]
    cdef uint8_t second[32]
    memcpy(buf, <const uint8_t *> prefix, prefix_len)
    cdef uint64_t nonce = <uint64_t> start_nonce
    cdef uint64_t attempts = <uint64_t> max_attempts
    cdef uint64_t a
    cdef int bits = difficulty_bits
    cdef int found = 0
    with nogil:
        for a in range(attempts):
            _store_be64(buf + prefix_len, nonce)
            _sha256(buf, prefix_len + 8, first)
            _sha256(first, 32, second)
            if _leading_zero_bits(second, 32) >= bits:
                found = 1
                break
            nonce += 1
    if found:
        return int(nonce)
    return None


cdef int _run_trial(const uint8_t *cell_seed, uint64_t trial, int n_total,
                    int k, int adv_count, int threshold_count) noexcept nogil:
    cdef uint8_t buf[40]
    cdef uint8_t trial_seed[32]
    cdef uint8_t entropy[32]
    cdef uint8_t nonce_block[32]
    cdef uint8_t nonce_digest[32]
    cdef uint8_t cat[64]
    cdef uint8_t seed[32]
    cdef Stream s
    cdef int *arr
    cdef int i, hits

    memcpy(buf, cell_seed, 32)
    _store_be64(buf + 32, trial)
    _sha256(buf, 40, trial_seed)

    # Synthetic spawn entropy and request nonce from the trial stream.
    memcpy(buf, trial_seed, 32)
    _store_be64(buf + 32, 0)
    _sha256(buf, 40, entropy)
    _store_be64(buf + 32, 1)
    _sha256(buf, 40, nonce_block)

    # Election seed: SHA256(entropy || SHA256(nonce)).
    _sha256(nonce_block, 8, nonce_digest)
    memcpy(cat, entropy, 32)
    memcpy(cat + 32, nonce_digest, 32)
    _sha256(cat, 64, seed)

    arr = <int *> malloc(n_total * sizeof(int))
    if arr == NULL:
        return -1
    for i in range(n_total):
        arr[i] = i
    _stream_init(&s, seed)
    _fisher_yates(&s, arr, n_total)
    hits = 0
    for i in range(k):
        if arr[i] < adv_count:
            hits += 1
    free(arr)
    return 1 if hits >= threshold_count else 0


def infiltration_cell(cell_seed: bytes, trials: int, n_total: int, k: int,
                      adv_count: int, threshold_count: int, threads: int = 0) -> int:
    if len(cell_seed) != 32:
        raise ValueError("cell_seed must be 32 bytes")
    if not 0 <= k <= n_total:
        raise ValueError(f"k={k} out of range for n_total={n_total}")
    cdef const uint8_t *seed_ptr = <const uint8_t *> cell_seed
    cdef Py_ssize_t t
    cdef Py_ssize_t n_trials = trials
    cdef int cn = n_total
    cdef int ck = k
    cdef int cadv = adv_count
    cdef int cthr = threshold_count
    cdef int num_threads = threads
    cdef long long infiltrated = 0
    cdef int outcome
    cdef int failed = 0
    if num_threads > 0:
        for t in prange(n_trials, nogil=True, schedule="static",
                        num_threads=num_threads):
            outcome = _run_trial(seed_ptr, <uint64_t> t, cn, ck, cadv, cthr)
            if outcome < 0:
                failed = 1
            else:
                infiltrated += outcome
    else:
        for t in prange(n_trials, nogil=True, schedule="static"):
            outcome = _run_trial(seed_ptr, <uint64_t> t, cn, ck, cadv, cthr)
            if outcome < 0:
                failed = 1
            else:
                infiltrated += outcome
    if failed:
        raise MemoryError()
    return int(infiltrated)
