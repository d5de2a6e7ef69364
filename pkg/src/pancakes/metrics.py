"""Compressive metrics: distance functions paired with delta codecs.

A compressive metric measures the distance between two points and can
encode one point in terms of another, with the encoded size growing
linearly in the distance. ``decode(encode(x, y), y) == x`` always holds.

Payload conventions:

* sequences are ``bytes``
* sets are sorted, duplicate-free ``int64`` numpy arrays
* vectors (``euclidean``, analysis only) are ``float64`` numpy arrays
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from rapidfuzz import process as rf_process
from rapidfuzz.distance import Levenshtein as rf_levenshtein

from . import _kernels as K
from .errors import InvalidInputError, UnsupportedMetricError
from .varint import varint_len

GAP_CHARS = b"-."


def strip_gaps(seq: bytes) -> bytes:
    """Drop MSA gap and padding characters."""
    if isinstance(seq, str):
        seq = seq.encode("ascii")
    return bytes(seq).translate(None, GAP_CHARS)


def _u8(seq: bytes) -> np.ndarray:
    return np.frombuffer(seq, dtype=np.uint8)


def as_set(values) -> np.ndarray:
    arr = np.unique(np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                               dtype=np.int64))
    if arr.size and arr[0] < 0:
        raise InvalidInputError("set members must be non-negative integers")
    return arr


def _csr(sets: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    indptr = np.zeros(len(sets) + 1, dtype=np.int64)
    if sets:
        np.cumsum([s.shape[0] for s in sets], out=indptr[1:])
        flat = np.concatenate(sets) if indptr[-1] else np.empty(0, dtype=np.int64)
    else:
        flat = np.empty(0, dtype=np.int64)
    return flat, indptr


# --------------------------------------------------------------------------
# operation-level functions


def hamming_distance(a: bytes, b: bytes) -> int:
    a, b = _as_bytes(a), _as_bytes(b)
    if len(a) != len(b):
        raise InvalidInputError(f"hamming needs equal lengths, got {len(a)} and {len(b)}")
    return int(np.count_nonzero(_u8(a) != _u8(b)))


def levenshtein_distance(a: bytes, b: bytes) -> int:
    return int(rf_levenshtein.distance(_as_bytes(a), _as_bytes(b)))


def jaccard_distance(a, b) -> float:
    return float(K.jaccard(as_set(a), as_set(b)))


def dice_distance(a, b) -> float:
    return float(K.dice(as_set(a), as_set(b)))


def nw_edit_trace(target: bytes, reference: bytes, band: int = -1) -> list[tuple[int, str, int | None]]:
    """Unit-cost Needleman-Wunsch edit script turning ``reference`` into ``target``.

    Each entry is ``(position, op, char)`` with ``op`` in ``{"del", "ins", "sub"}``
    and ``position`` indexing ``reference``. ``char`` is ``None`` for deletions.
    """
    pos, ops, chars, _ = K.nw_trace(_u8(_as_bytes(target)), _u8(_as_bytes(reference)), band)
    names = {K.OP_DEL: "del", K.OP_INS: "ins", K.OP_SUB: "sub"}
    return [
        (int(p), names[int(o)], None if o == K.OP_DEL else int(c))
        for p, o, c in zip(pos, ops, chars)
    ]


def apply_edit_trace(trace, reference: bytes) -> bytes:
    """Apply a trace from :func:`nw_edit_trace` to ``reference``."""
    out = bytearray()
    cursor = 0
    for p, op, ch in trace:
        out += reference[cursor:p]
        cursor = p
        if op == "ins":
            out.append(ch)
        elif op == "sub":
            out.append(ch)
            cursor += 1
        else:
            cursor += 1
    out += reference[cursor:]
    return bytes(out)


def _as_bytes(seq) -> bytes:
    if isinstance(seq, str):
        return seq.encode("ascii")
    return bytes(seq)


# --------------------------------------------------------------------------
# metric objects


class CompressiveMetric:
    """Base class; subclasses set ``name`` and ``kind`` and implement the codec."""

    name: str = ""
    kind: str = ""  # "sequence" | "set" | "vector"
    encoding_kind: str | None = None
    integer_valued = True
    # True metric (triangle inequality). Non-metrics must supply a monotone
    # map into a true metric for pruning.
    is_metric = True

    def coerce(self, payload):
        return _as_bytes(payload)

    def distance(self, a, b):
        raise NotImplementedError

    def distances(self, q, points: Sequence) -> np.ndarray:
        return np.array([self.distance(q, p) for p in points])

    def encode(self, target, ref) -> bytes:
        raise UnsupportedMetricError(f"{self.name} has no codec")

    def decode(self, encoding: bytes, ref):
        buf = np.frombuffer(encoding, dtype=np.uint8)
        payload, end = self.decode_at(buf, 0, len(buf), ref)
        if end != len(buf):
            raise ValueError("trailing bytes after encoding")
        return payload

    def decode_at(self, buf: np.ndarray, pos: int, end: int, ref):
        raise UnsupportedMetricError(f"{self.name} has no codec")

    def decode_run(self, buf: np.ndarray, pos: int, end: int, count: int, ref):
        """Decode ``count`` back-to-back encodings; return ``(payloads, next_pos)``."""
        out = []
        for _ in range(count):
            p, pos = self.decode_at(buf, pos, end, ref)
            out.append(p)
        return out, pos

    def encoded_size(self, target, ref) -> int:
        return len(self.encode(target, ref))

    def encoded_sizes(self, ref, points: Sequence) -> np.ndarray:
        return np.array([self.encoded_size(p, ref) for p in points], dtype=np.int64)

    def size_coefficients(self, target, ref) -> tuple[float, float]:
        """``(alpha, beta)`` with ``size(encode(target, ref)) <= alpha * d + beta``."""
        raise UnsupportedMetricError(f"{self.name} has no codec")

    def encoded_size_bound(self, distance: float, target, ref) -> float:
        alpha, beta = self.size_coefficients(target, ref)
        return alpha * distance + beta

    # Monotone map into a true metric; identity for true metrics.
    def to_metric(self, d):
        return d

    def payload_bytes(self, payload) -> bytes:
        """Raw storage form of a payload (used for the root center)."""
        return _as_bytes(payload)

    def payload_from_bytes(self, raw: bytes):
        return bytes(raw)

    def pack(self, payloads: Sequence) -> "Packed":
        return Packed(self, payloads)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class Packed:
    """A dataset prepared for fast one-to-many distance and size queries."""

    def __init__(self, metric: CompressiveMetric, payloads: Sequence):
        self.metric = metric
        self.payloads = list(payloads)

    def __len__(self):
        return len(self.payloads)

    def __getitem__(self, i):
        return self.payloads[i]

    def distances(self, i: int, idx: np.ndarray) -> np.ndarray:
        return self.metric.distances(self.payloads[i], [self.payloads[j] for j in idx])

    def encoded_sizes(self, ref: int, idx: np.ndarray) -> np.ndarray:
        return self.metric.encoded_sizes(self.payloads[ref], [self.payloads[j] for j in idx])


class Hamming(CompressiveMetric):
    name = "hamming"
    kind = "sequence"
    encoding_kind = "index-diff"

    def distance(self, a, b):
        return hamming_distance(a, b)

    def distances(self, q, points):
        q = _as_bytes(q)
        if not points:
            return np.zeros(0, dtype=np.int64)
        mat = _matrix(points)
        if mat.shape[1] != len(q):
            raise InvalidInputError(
                f"hamming needs equal lengths, got {len(q)} and {mat.shape[1]}")
        return np.count_nonzero(mat != _u8(q), axis=1).astype(np.int64)

    def encode(self, target, ref):
        target, ref = _as_bytes(target), _as_bytes(ref)
        if len(target) != len(ref):
            raise InvalidInputError("index-diff needs equal lengths")
        return K.index_diff_encode(_u8(target), _u8(ref)).tobytes()

    def decode_at(self, buf, pos, end, ref):
        out, pos = K.index_diff_decode(buf, pos, end, _u8(ref))
        return out.tobytes(), pos

    def decode_run(self, buf, pos, end, count, ref):
        flat, _, pos = K.index_diff_decode_run(buf, pos, end, count, _u8(ref))
        n = len(ref)
        raw = flat.tobytes()
        return [raw[k * n:(k + 1) * n] for k in range(count)], pos

    def encoded_size(self, target, ref):
        return int(self.encoded_sizes(ref, [target])[0])

    def encoded_sizes(self, ref, points):
        if not points:
            return np.zeros(0, dtype=np.int64)
        return _index_diff_sizes(_matrix(points), _u8(_as_bytes(ref)))

    def size_coefficients(self, target, ref):
        return varint_len(max(len(ref) - 1, 0)) + 2, 1

    def pack(self, payloads):
        return PackedMatrix(self, payloads)


def _matrix(points) -> np.ndarray:
    n = len(points[0])
    raw = b"".join(points)
    if len(raw) != n * len(points):
        raise InvalidInputError("hamming needs equal-length sequences")
    return np.frombuffer(raw, dtype=np.uint8).reshape(len(points), n)


_weight_cache: dict[int, np.ndarray] = {}


def _index_diff_sizes(mat: np.ndarray, ref: np.ndarray) -> np.ndarray:
    n = ref.shape[0]
    w = _weight_cache.get(n)
    if w is None:
        w = np.array([varint_len(i) + 1 for i in range(n)], dtype=np.int64)
        _weight_cache[n] = w
    diff = mat != ref
    counts = diff.sum(axis=1)
    body = diff.astype(np.int64) @ w
    heads = np.ones_like(counts)
    big = counts >= 0x80
    if big.any():
        heads[big] = [varint_len(int(c)) for c in counts[big]]
    return body + heads


class PackedMatrix(Packed):
    """Equal-length sequences held as one 2-D byte matrix."""

    def __init__(self, metric, payloads):
        super().__init__(metric, payloads)
        self.matrix = _matrix(self.payloads) if self.payloads else np.zeros((0, 0), np.uint8)

    def distances(self, i, idx):
        return np.count_nonzero(self.matrix[idx] != self.matrix[i], axis=1).astype(np.int64)

    def encoded_sizes(self, ref, idx):
        return _index_diff_sizes(self.matrix[idx], self.matrix[ref])


class Levenshtein(CompressiveMetric):
    name = "levenshtein"
    kind = "sequence"
    encoding_kind = "edit-trace"

    def distance(self, a, b):
        return levenshtein_distance(a, b)

    def distances(self, q, points):
        if not points:
            return np.zeros(0, dtype=np.int64)
        return rf_process.cdist([_as_bytes(q)], points, scorer=rf_levenshtein.distance,
                                dtype=np.int64, workers=1)[0]

    def encode(self, target, ref):
        target, ref = _as_bytes(target), _as_bytes(ref)
        band = levenshtein_distance(target, ref)
        pos, ops, chars, _ = K.nw_trace(_u8(target), _u8(ref), band)
        return K.trace_serialize(pos, ops, chars).tobytes()

    def decode_at(self, buf, pos, end, ref):
        out, pos = K.edit_trace_decode(buf, pos, end, _u8(ref))
        return out.tobytes(), pos

    def encoded_size(self, target, ref):
        target, ref = _as_bytes(target), _as_bytes(ref)
        band = levenshtein_distance(target, ref)
        return int(K.edit_trace_encoded_size(_u8(target), _u8(ref), band))

    def encoded_sizes(self, ref, points):
        ref = _as_bytes(ref)
        bands = self.distances(ref, points)
        r = _u8(ref)
        return np.array([K.edit_trace_encoded_size(_u8(p), r, int(b))
                         for p, b in zip(points, bands)], dtype=np.int64)

    def size_coefficients(self, target, ref):
        return varint_len(len(ref)) + 3, 1


class GaplessLevenshtein(Levenshtein):
    """Levenshtein between gap-stripped versions of aligned sequences.

    Used to query indexes built over MSAs with unaligned sequences. It is
    a pseudometric on aligned sequences, so ball pruning stays sound.
    """

    name = "levenshtein-gapless"

    def distance(self, a, b):
        return levenshtein_distance(strip_gaps(a), strip_gaps(b))

    def distances(self, q, points):
        return super().distances(strip_gaps(q), [strip_gaps(p) for p in points])


class _SetMetric(CompressiveMetric):
    kind = "set"
    encoding_kind = "set-diff"
    integer_valued = False

    _one = staticmethod(K.jaccard)
    _many = staticmethod(K.jaccard_many)

    def coerce(self, payload):
        return as_set(payload)

    def distance(self, a, b):
        return float(self._one(as_set(a), as_set(b)))

    def distances(self, q, points):
        flat, indptr = _csr(points)
        return self._many(as_set(q), flat, indptr)

    def encode(self, target, ref):
        return K.set_diff_encode(as_set(target), as_set(ref)).tobytes()

    def decode_at(self, buf, pos, end, ref):
        return K.set_diff_decode(buf, pos, end, ref)

    def encoded_size(self, target, ref):
        return int(K.set_diff_size(as_set(target), as_set(ref)))

    def encoded_sizes(self, ref, points):
        flat, indptr = _csr(points)
        return K.set_diff_sizes_many(as_set(ref), flat, indptr)

    def payload_bytes(self, payload):
        return K.set_diff_encode(payload, np.empty(0, dtype=np.int64)).tobytes()

    def payload_from_bytes(self, raw):
        return self.decode(raw, np.empty(0, dtype=np.int64))

    def pack(self, payloads):
        return PackedSets(self, payloads)


class Jaccard(_SetMetric):
    name = "jaccard"

    def size_coefficients(self, target, ref):
        union = np.union1d(target, ref)
        top = int(union[-1]) if union.size else 0
        return union.size * (varint_len(top) + 1), 2


class Dice(_SetMetric):
    """Dice distance. Not a metric; pruning runs on ``2d / (1 + d)`` (Jaccard)."""

    name = "dice"
    _one = staticmethod(K.dice)
    _many = staticmethod(K.dice_many)
    is_metric = False

    def size_coefficients(self, target, ref):
        total = len(target) + len(ref)
        top = max([int(s[-1]) for s in (target, ref) if len(s)], default=0)
        return total * (varint_len(top) + 1), 2

    def to_metric(self, d):
        return 2.0 * d / (1.0 + d)


class PackedSets(Packed):
    def __init__(self, metric, payloads):
        super().__init__(metric, payloads)
        self.flat, self.indptr = _csr(self.payloads)

    def _sub(self, idx):
        starts = self.indptr[idx]
        ends = self.indptr[np.asarray(idx) + 1]
        lens = ends - starts
        indptr = np.zeros(len(idx) + 1, dtype=np.int64)
        np.cumsum(lens, out=indptr[1:])
        if indptr[-1] == 0:
            return np.empty(0, dtype=np.int64), indptr
        take = np.repeat(starts - indptr[:-1], lens) + np.arange(indptr[-1])
        return self.flat[take], indptr

    def distances(self, i, idx):
        flat, indptr = self._sub(idx)
        return self.metric._many(self.payloads[i], flat, indptr)

    def encoded_sizes(self, ref, idx):
        flat, indptr = self._sub(idx)
        return K.set_diff_sizes_many(self.payloads[ref], flat, indptr)


class Euclidean(CompressiveMetric):
    """Plain L2 distance on float vectors; tree building and analysis only."""

    name = "euclidean"
    kind = "vector"
    integer_valued = False

    def coerce(self, payload):
        return np.asarray(payload, dtype=np.float64)

    def distance(self, a, b):
        return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))

    def distances(self, q, points):
        if not len(points):
            return np.zeros(0)
        return np.linalg.norm(np.asarray(points) - q, axis=1)

    def pack(self, payloads):
        return PackedVectors(self, payloads)


class PackedVectors(Packed):
    def __init__(self, metric, payloads):
        super().__init__(metric, payloads)
        self.matrix = np.asarray(payloads, dtype=np.float64)

    def distances(self, i, idx):
        return np.linalg.norm(self.matrix[idx] - self.matrix[i], axis=1)


METRICS = {
    cls.name: cls
    for cls in (Hamming, Levenshtein, GaplessLevenshtein, Jaccard, Dice, Euclidean)
}


def get_metric(name: str) -> CompressiveMetric:
    try:
        return METRICS[name]()
    except KeyError:
        raise UnsupportedMetricError(
            f"unknown metric {name!r}; choose from {sorted(METRICS)}") from None
