"""Readers and writers for FASTA files and integer-set transaction files."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InvalidInputError
from .metrics import as_set, strip_gaps

__all__ = [
    "Dataset",
    "read_fasta",
    "write_fasta",
    "read_set_transactions",
    "write_set_transactions",
    "split_holdout",
    "filter_lengths",
    "strip_gaps",
    "load_dataset",
]


@dataclass
class Dataset:
    points: list
    ids: np.ndarray
    headers: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        headers = [self.headers[i] for i in rows] if self.headers else []
        return Dataset([self.points[i] for i in rows], self.ids[rows], headers)


def read_fasta(path: str | os.PathLike, msa: bool = False) -> Dataset:
    """Read a FASTA file; with ``msa`` every sequence must have equal length."""
    headers: list[str] = []
    seqs: list[bytes] = []
    chunks: list[bytes] | None = None
    with open(path, "rb") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith(b">"):
                if chunks is not None:
                    seqs.append(b"".join(chunks))
                headers.append(line[1:].decode("utf-8", "replace"))
                chunks = []
            elif chunks is None:
                raise DataError(f"{path}:{lineno}: sequence data before the first header")
            elif line.startswith(b";"):
                continue
            else:
                chunks.append(line)
    if chunks is not None:
        seqs.append(b"".join(chunks))
    if msa and seqs:
        width = len(seqs[0])
        for i, s in enumerate(seqs):
            if len(s) != width:
                raise DataError(
                    f"{path}: alignment record {i} ({headers[i]!r}) has length {len(s)}, expected {width}")
    return Dataset(seqs, np.arange(len(seqs), dtype=np.int64), headers)


def write_fasta(path: str | os.PathLike, seqs, headers=None, width: int = 80) -> None:
    with open(path, "wb") as fh:
        for i, s in enumerate(seqs):
            s = s.encode() if isinstance(s, str) else bytes(s)
            name = headers[i] if headers else f"seq{i}"
            fh.write(b">" + name.encode() + b"\n")
            for k in range(0, len(s), width):
                fh.write(s[k:k + width] + b"\n")
            if not s:
                fh.write(b"\n")


def read_set_transactions(path: str | os.PathLike) -> Dataset:
    """One set per line, whitespace-separated non-negative integers."""
    sets = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            tokens = line.split()
            try:
                values = [int(t) for t in tokens]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer token in {line.strip()!r}") from None
            if any(v < 0 for v in values):
                raise DataError(f"{path}:{lineno}: negative member")
            sets.append(as_set(values))
    return Dataset(sets, np.arange(len(sets), dtype=np.int64))


def write_set_transactions(path: str | os.PathLike, sets) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sets:
            fh.write(" ".join(str(int(v)) for v in as_set(s)) + "\n")


def split_holdout(dataset: Dataset, count: int, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Split off ``count`` random points as queries; ids are kept."""
    n = len(dataset)
    if count < 0 or (count >= n and count > 0):
        raise InvalidInputError(f"holdout of {count} from {n} points leaves nothing to index")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(n, count, replace=False)) if count else np.zeros(0, dtype=np.int64)
    mask = np.ones(n, dtype=bool)
    mask[chosen] = False
    return dataset.subset(np.flatnonzero(mask)), dataset.subset(chosen)


def filter_lengths(dataset: Dataset, min_len: int = 30, max_len: int = 1000) -> Dataset:
    """Keep sequences with ``min_len <= len <= max_len``."""
    keep = [i for i, s in enumerate(dataset.points) if min_len <= len(s) <= max_len]
    return dataset.subset(keep)


FORMATS = ("fasta", "fasta-msa", "sets")


def load_dataset(path, fmt: str) -> Dataset:
    if fmt == "fasta":
        return read_fasta(path)
    if fmt == "fasta-msa":
        return read_fasta(path, msa=True)
    if fmt == "sets":
        return read_set_transactions(path)
    raise InvalidInputError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")
