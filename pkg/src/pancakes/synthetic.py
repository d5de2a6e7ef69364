"""Seeded synthetic datasets with controlled self-similarity or dimension."""

from __future__ import annotations

import numpy as np

from .metrics import as_set

DNA = np.frombuffer(b"ACGT", dtype=np.uint8)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_sequences(n: int, length: int | tuple[int, int], seed=0, alphabet=DNA) -> list[bytes]:
    """Independent uniform sequences (no shared structure)."""
    rng = _rng(seed)
    lo, hi = (length, length) if isinstance(length, int) else length
    lens = rng.integers(lo, hi + 1, n)
    return [rng.choice(alphabet, int(k)).tobytes() for k in lens]


def mutate(seq: bytes, rate: float, rng: np.random.Generator, alphabet=DNA, indels: bool = True) -> bytes:
    """Apply roughly ``rate * len(seq)`` random edits.

    With ``indels`` the edits are split evenly between substitutions,
    insertions and deletions; otherwise only substitutions are made.
    """
    arr = np.frombuffer(seq, dtype=np.uint8)
    u = rng.random(arr.size)
    new = rng.choice(alphabet, arr.size)
    if not indels:
        out = arr.copy()
        hit = u < rate
        out[hit] = new[hit]
        return out.tobytes()
    third = rate / 3
    sub = (u >= third) & (u < 2 * third)
    keep = u >= third  # deletions drop the character
    ins = u >= 2 * third
    ins &= u < rate
    base = np.where(sub, new, arr)
    # each insertion places a fresh character before the original one
    counts = keep.astype(np.int64) + ins
    out = np.empty(int(counts.sum()), dtype=np.uint8)
    ends = np.cumsum(counts)
    out[ends[keep] - 1] = base[keep]
    extra = rng.choice(alphabet, int(ins.sum()))
    out[ends[ins] - 2] = extra
    return out.tobytes()


def mutated_corpus(
    n: int,
    n_seeds: int = 100,
    length: tuple[int, int] = (300, 500),
    max_rate: float = 0.05,
    seed=0,
    indels: bool = True,
) -> list[bytes]:
    """Each sequence is a seed sequence with at most ``max_rate`` edits."""
    rng = _rng(seed)
    seeds = random_sequences(n_seeds, length, rng)
    picks = rng.integers(0, n_seeds, n)
    rates = rng.uniform(0, max_rate, n)
    return [mutate(seeds[p], r, rng, indels=indels) for p, r in zip(picks, rates)]


def grid_sequences(n: int, side: int = 256, seed=0) -> tuple[list[bytes], np.ndarray]:
    """Sequences whose Hamming geometry is an L1 grid in two dimensions.

    A random base of length ``2 * side`` is split into two halves. Point
    ``(i, j)`` rewrites the first ``i`` characters of the first half and the
    first ``j`` of the second, so Hamming distance equals the L1 distance
    between grid coordinates. Returns the sequences and their coordinates;
    ``n`` distinct grid points are drawn without replacement.
    """
    rng = _rng(seed)
    total = (side + 1) ** 2
    if n > total:
        raise ValueError(f"grid of side {side} holds only {total} points")
    base, alt = _grid_base(rng, side)
    cells = rng.choice(total, n, replace=False)
    coords = np.stack([cells // (side + 1), cells % (side + 1)], axis=1)
    return [grid_point(base, alt, side, int(i), int(j)) for i, j in coords], coords


def _grid_base(rng: np.random.Generator, side: int):
    base = rng.choice(DNA, 2 * side)
    shift = rng.integers(1, 4, 2 * side)
    # every rewritten character differs from the base character
    alt = DNA[(np.searchsorted(DNA, base) + shift) % 4]
    return base, alt


def grid_point(base: np.ndarray, alt: np.ndarray, side: int, i: int, j: int) -> bytes:
    s = base.copy()
    s[:i] = alt[:i]
    s[side:side + j] = alt[side:side + j]
    return s.tobytes()


def grid_queries(n: int, side: int = 256, seed=0, query_seed=1) -> list[bytes]:
    """Random grid points on the same base as ``grid_sequences(..., seed)``."""
    base, alt = _grid_base(_rng(seed), side)
    qrng = _rng(query_seed)
    coords = qrng.integers(0, side + 1, (n, 2))
    return [grid_point(base, alt, side, int(i), int(j)) for i, j in coords]


def aligned_corpus(n: int, width: int = 120, n_seeds: int = 10, gap_rate: float = 0.1,
                   rate: float = 0.05, seed=0) -> list[bytes]:
    """Equal-width rows with '-' gaps, mimicking a multiple sequence alignment."""
    rng = _rng(seed)
    seeds = [rng.choice(DNA, width) for _ in range(n_seeds)]
    gap_masks = [rng.random(width) < gap_rate for _ in range(n_seeds)]
    out = []
    for _ in range(n):
        k = int(rng.integers(n_seeds))
        row = seeds[k].copy()
        sub = rng.random(width) < rate
        row[sub] = rng.choice(DNA, int(sub.sum()))
        gaps = gap_masks[k] ^ (rng.random(width) < rate / 2)
        row[gaps] = ord("-")
        out.append(row.tobytes())
    return out


def random_sets(n: int, universe: int, size: tuple[int, int] = (1, 40), seed=0) -> list[np.ndarray]:
    rng = _rng(seed)
    sizes = rng.integers(size[0], size[1] + 1, n)
    return [as_set(rng.choice(universe, min(int(k), universe), replace=False)) for k in sizes]


def topic_sets(n: int, n_topics: int = 50, universe: int = 5000, topic_size: int = 30,
               keep: float = 0.8, noise: int = 3, seed=0) -> list[np.ndarray]:
    """Sets drawn around a few topics: most of a topic plus a little noise."""
    rng = _rng(seed)
    topics = [rng.choice(universe, topic_size, replace=False) for _ in range(n_topics)]
    out = []
    for _ in range(n):
        t = topics[int(rng.integers(n_topics))]
        part = t[rng.random(topic_size) < keep]
        extra = rng.integers(0, universe, int(rng.integers(0, noise + 1)))
        out.append(as_set(np.concatenate([part, extra])))
    return out


def uniform_disk(n: int, radius: float = 1.0, seed=0) -> np.ndarray:
    """Points uniform on a disk in the plane."""
    rng = _rng(seed)
    r = radius * np.sqrt(rng.random(n))
    theta = rng.uniform(0, 2 * np.pi, n)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
