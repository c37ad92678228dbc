"""Counter-based random substreams.

Every stream is a Philox generator keyed by a hash of ``(seed, *path)``, so
any draw is a pure function of its key and never depends on execution order
or worker count.  Bulk sampling splits the index range ``[0, n)`` into fixed
blocks of ``BLOCK_SIZE`` draws; block ``j`` uses the substream keyed
``(seed, *path, j)``, which keeps results bit-identical under any parallel
schedule (and stable under growing ``n``).
"""
from __future__ import annotations

import hashlib

import numpy as np

BLOCK_SIZE = 1 << 16


def philox_key(*parts) -> np.ndarray:
    """Derive a 128-bit Philox key from integers and/or short strings."""
    h = hashlib.blake2b(digest_size=16)
    for p in parts:
        if isinstance(p, (bool, np.bool_)):
            p = int(p)
        if isinstance(p, (int, np.integer)):
            h.update(b"i")
            h.update(int(p).to_bytes(16, "little", signed=True))
        elif isinstance(p, str):
            raw = p.encode("utf-8")
            h.update(b"s" + len(raw).to_bytes(4, "little"))
            h.update(raw)
        else:
            raise TypeError(f"key part must be int or str, got {type(p)!r}")
    return np.frombuffer(h.digest(), dtype=np.uint64).copy()


def substream(*parts) -> np.random.Generator:
    """Independent generator for the given key path."""
    return np.random.Generator(np.random.Philox(key=philox_key(*parts)))


def derive_seed(*parts) -> int:
    """Collapse a key path to a 63-bit integer seed for nested samplers."""
    return int(philox_key(*parts)[0] >> np.uint64(1))


def block_map(n: int, draw_block, *parts) -> np.ndarray:
    """Fill ``n`` draws block by block.

    ``draw_block(gen, size)`` must return exactly ``size`` values using only
    ``gen``.  Block ``j`` always requests the full ``BLOCK_SIZE`` (truncated
    output for the tail block), so draw ``i`` depends only on
    ``(parts, i // BLOCK_SIZE)``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    pieces = []
    done = 0
    block = 0
    while done < n:
        gen = substream(*parts, block)
        vals = np.asarray(draw_block(gen, BLOCK_SIZE), dtype=np.float64)
        take = min(BLOCK_SIZE, n - done)
        pieces.append(vals[:take])
        done += take
        block += 1
    if not pieces:
        return np.empty(0, dtype=np.float64)
    return np.concatenate(pieces)


def block_standard_normal(n: int, *parts) -> np.ndarray:
    return block_map(n, lambda gen, m: gen.standard_normal(m), *parts)


def block_rejection(n: int, propose, accept, *parts) -> tuple[np.ndarray, int]:
    """Rejection-sample ``n`` values with per-block substreams.

    ``propose(gen, m)`` draws ``m`` candidates; ``accept(values)`` returns a
    boolean mask.  Each block keeps drawing full proposal rounds from its own
    substream until its quota is filled, so the output is deterministic in
    ``parts`` alone.  Returns ``(samples, proposals_used)``.
    """
    out = []
    proposals = 0
    done = 0
    block = 0
    while done < n:
        quota = min(BLOCK_SIZE, n - done)
        gen = substream(*parts, block)
        got = []
        have = 0
        while have < quota:
            cand = np.asarray(propose(gen, BLOCK_SIZE), dtype=np.float64)
            hits = np.nonzero(accept(cand))[0]
            if have + hits.size >= quota:
                need = quota - have
                proposals += int(hits[need - 1]) + 1  # proposals examined this round
                got.append(cand[hits[:need]])
                have = quota
            else:
                proposals += cand.size
                got.append(cand[hits])
                have += hits.size
        out.append(np.concatenate(got))
        done += quota
        block += 1
    if not out:
        return np.empty(0, dtype=np.float64), 0
    return np.concatenate(out), proposals
