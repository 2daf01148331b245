"""Per-trial random substreams.

Trial ``i`` of a run seeded with ``seed`` always consumes the same block of
uniforms: block ``i`` of a Philox counter stream keyed by the seed.  Chunked,
threaded and serial runs therefore see identical draws.
"""

from __future__ import annotations

import secrets
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

import numpy as np

from .fock import DomainError, binomial_table

R = TypeVar("R")
DEFAULT_CHUNK = 1 << 16
_WORDS_PER_COUNTER = 4
_TO_UNIT = 2.0**-53


def fresh_seed() -> int:
    return secrets.randbits(63)


def check_seed(seed: int) -> int:
    if int(seed) != seed or not 0 <= seed < 2**128:
        raise DomainError(f"seed must be an integer in [0, 2^128), got {seed!r}")
    return int(seed)


def trial_uniforms(seed: int, start: int, count: int, width: int) -> np.ndarray:
    """Uniforms in [0, 1) for trials start..start+count-1, shape (count, width).

    ``width`` must be a multiple of 4 (one Philox counter block).
    """
    if width % _WORDS_PER_COUNTER:
        raise ValueError("width must be a multiple of 4")
    gen = np.random.Philox(key=check_seed(seed))
    gen.advance(start * width // _WORDS_PER_COUNTER)
    raw = gen.random_raw(count * width)
    return ((raw >> np.uint64(11)).astype(np.float64) * _TO_UNIT).reshape(count, width)


def chunks(n: int, size: int = DEFAULT_CHUNK) -> List[tuple]:
    return [(s, min(size, n - s)) for s in range(0, n, size)]


def run_chunked(work: Callable[[int, int], R], n: int, threads: int = 1, size: int = DEFAULT_CHUNK) -> List[R]:
    """Apply ``work(start, count)`` over all chunks; results in chunk order."""
    parts = chunks(n, size)
    if threads <= 1 or len(parts) == 1:
        return [work(s, c) for s, c in parts]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda sc: work(*sc), parts))


def binomial_inverse(u: np.ndarray, n: np.ndarray, p) -> np.ndarray:
    """Binomial(n, p) draws by inversion (exact CDF walk) for n <= 64."""
    n = np.asarray(n, dtype=np.int64)
    p = np.broadcast_to(np.asarray(p, dtype=float), n.shape)
    out = np.zeros(n.shape, dtype=np.int64)
    if n.size == 0:
        return out
    comb = binomial_table()
    cdf = np.zeros(n.shape)
    for j in range(int(n.max())):
        live = j < n
        pmf = comb[n, j] * p**j * (1.0 - p) ** np.clip(n - j, 0, None)
        cdf = cdf + np.where(live, pmf, 0.0)
        out += (live & (u >= cdf)).astype(np.int64)
    return out
