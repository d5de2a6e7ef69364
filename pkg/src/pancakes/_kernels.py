"""Numba kernels for the codecs and set distances.

All byte buffers are 1-D ``uint8`` arrays; sets are sorted, duplicate-free
``int64`` arrays. Ragged collections are passed CSR-style as a flat array
plus an ``indptr`` of length ``count + 1``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

OP_DEL = 0
OP_INS = 1
OP_SUB = 2


# --------------------------------------------------------------------------
# varints


@njit(cache=True, inline="always")
def vlen(v):
    n = 1
    while v >= 0x80:
        v >>= 7
        n += 1
    return n


@njit(cache=True, inline="always")
def vput(buf, pos, v):
    while v >= 0x80:
        buf[pos] = (v & 0x7F) | 0x80
        v >>= 7
        pos += 1
    buf[pos] = v
    return pos + 1


@njit(cache=True, inline="always")
def vget(buf, pos, end):
    v = 0
    shift = 0
    while True:
        if pos >= end:
            raise ValueError("truncated varint")
        b = np.int64(buf[pos])
        pos += 1
        v |= (b & 0x7F) << shift
        if b < 0x80:
            return v, pos
        shift += 7
        if shift > 63:
            raise ValueError("varint too long")


# --------------------------------------------------------------------------
# index-diff (equal-length sequences)


@njit(cache=True)
def index_diff_encode(target, ref):
    n = target.shape[0]
    count = 0
    size = 0
    for i in range(n):
        if target[i] != ref[i]:
            count += 1
            size += vlen(i) + 1
    out = np.empty(vlen(count) + size, dtype=np.uint8)
    p = vput(out, 0, count)
    for i in range(n):
        if target[i] != ref[i]:
            p = vput(out, p, i)
            out[p] = target[i]
            p += 1
    return out


@njit(cache=True)
def index_diff_decode(buf, pos, end, ref):
    out = ref.copy()
    n = ref.shape[0]
    count, pos = vget(buf, pos, end)
    last = -1
    for _ in range(count):
        i, pos = vget(buf, pos, end)
        if i >= n or i <= last:
            raise ValueError("index-diff position out of order or range")
        if pos >= end:
            raise ValueError("truncated index-diff entry")
        out[i] = buf[pos]
        pos += 1
        last = i
    return out, pos


@njit(cache=True)
def index_diff_decode_run(buf, pos, end, count, ref):
    """Decode ``count`` consecutive index-diff encodings against ``ref``."""
    n = ref.shape[0]
    flat = np.empty(count * n, dtype=np.uint8)
    for k in range(count):
        row = flat[k * n:(k + 1) * n]
        row[:] = ref
        m, pos = vget(buf, pos, end)
        last = -1
        for _ in range(m):
            i, pos = vget(buf, pos, end)
            if i >= n or i <= last:
                raise ValueError("index-diff position out of order or range")
            if pos >= end:
                raise ValueError("truncated index-diff entry")
            row[i] = buf[pos]
            pos += 1
            last = i
    indptr = np.arange(count + 1, dtype=np.int64) * n
    return flat, indptr, pos


# --------------------------------------------------------------------------
# edit traces (unit-cost Needleman-Wunsch)


@njit(cache=True)
def _nw_fill(target, ref, w):
    # Band of half-width w around the main diagonal; row i stores
    # columns j in [i - w, i + w] at offset j - i + w.
    n = ref.shape[0]
    m = target.shape[0]
    width = 2 * w + 1
    big = np.int32(n + m + 1)
    D = np.full((n + 1, width), big, dtype=np.int32)
    for j in range(0, min(m, w) + 1):
        D[0, j + w] = j
    for i in range(1, n + 1):
        lo = max(0, i - w)
        hi = min(m, i + w)
        ri = ref[i - 1]
        for j in range(lo, hi + 1):
            k = j - i + w
            if j == 0:
                D[i, k] = i
                continue
            best = D[i - 1, k] + (1 if ri != target[j - 1] else 0)
            if k + 1 < width:
                v = D[i - 1, k + 1] + 1
                if v < best:
                    best = v
            if k >= 1:
                v = D[i, k - 1] + 1
                if v < best:
                    best = v
            D[i, k] = best
    return D


@njit(cache=True)
def nw_trace(target, ref, band):
    """Edit script turning ``ref`` into ``target``.

    Returns ``(positions, ops, chars, distance)``; positions are indices
    into ``ref`` and the script is ordered for left-to-right application.
    ``band`` is any upper bound on the edit distance (``-1`` for none).
    """
    n = ref.shape[0]
    m = target.shape[0]
    full = max(n, m)
    w = full if band < 0 else max(band, abs(n - m))
    if w > full:
        w = full
    while True:
        D = _nw_fill(target, ref, w)
        dist = D[n, m - n + w]
        if dist <= w or w >= full:
            break
        w = min(full, max(1, 2 * w))

    pos = np.empty(dist, dtype=np.int64)
    ops = np.empty(dist, dtype=np.uint8)
    chars = np.zeros(dist, dtype=np.uint8)
    e = dist
    i = n
    j = m
    while i > 0 or j > 0:
        k = j - i + w
        cur = D[i, k]
        if i > 0 and j > 0:
            sub = 1 if ref[i - 1] != target[j - 1] else 0
            if D[i - 1, k] + sub == cur:
                if sub:
                    e -= 1
                    pos[e] = i - 1
                    ops[e] = OP_SUB
                    chars[e] = target[j - 1]
                i -= 1
                j -= 1
                continue
        if i > 0 and k + 1 <= 2 * w and D[i - 1, k + 1] + 1 == cur:
            e -= 1
            pos[e] = i - 1
            ops[e] = OP_DEL
            i -= 1
            continue
        e -= 1
        pos[e] = i
        ops[e] = OP_INS
        chars[e] = target[j - 1]
        j -= 1
    return pos, ops, chars, dist


@njit(cache=True)
def trace_size(pos, ops):
    size = vlen(pos.shape[0])
    for e in range(pos.shape[0]):
        size += vlen(pos[e]) + 1
        if ops[e] != OP_DEL:
            size += 1
    return size


@njit(cache=True)
def trace_serialize(pos, ops, chars):
    out = np.empty(trace_size(pos, ops), dtype=np.uint8)
    p = vput(out, 0, pos.shape[0])
    for e in range(pos.shape[0]):
        p = vput(out, p, pos[e])
        out[p] = ops[e]
        p += 1
        if ops[e] != OP_DEL:
            out[p] = chars[e]
            p += 1
    return out


@njit(cache=True)
def edit_trace_encoded_size(target, ref, band):
    pos, ops, chars, dist = nw_trace(target, ref, band)
    return trace_size(pos, ops)


@njit(cache=True)
def edit_trace_decode(buf, pos, end, ref):
    n = ref.shape[0]
    count, pos = vget(buf, pos, end)
    out = np.empty(n + count, dtype=np.uint8)
    o = 0
    cursor = 0
    for _ in range(count):
        p, pos = vget(buf, pos, end)
        if pos >= end:
            raise ValueError("truncated edit-trace entry")
        op = buf[pos]
        pos += 1
        if p < cursor or p > n:
            raise ValueError("edit-trace position out of order or range")
        while cursor < p:
            out[o] = ref[cursor]
            o += 1
            cursor += 1
        if op == OP_DEL:
            if p >= n:
                raise ValueError("edit-trace deletion past end")
            cursor += 1
        elif op == OP_INS or op == OP_SUB:
            if pos >= end:
                raise ValueError("truncated edit-trace entry")
            out[o] = buf[pos]
            o += 1
            pos += 1
            if op == OP_SUB:
                if p >= n:
                    raise ValueError("edit-trace substitution past end")
                cursor += 1
        else:
            raise ValueError("unknown edit-trace opcode")
    while cursor < n:
        out[o] = ref[cursor]
        o += 1
        cursor += 1
    return out[:o].copy(), pos


# --------------------------------------------------------------------------
# sorted integer sets


@njit(cache=True, inline="always")
def _intersection_size(a, b):
    i = 0
    j = 0
    c = 0
    while i < a.shape[0] and j < b.shape[0]:
        if a[i] == b[j]:
            c += 1
            i += 1
            j += 1
        elif a[i] < b[j]:
            i += 1
        else:
            j += 1
    return c


@njit(cache=True)
def jaccard(a, b):
    inter = _intersection_size(a, b)
    union = a.shape[0] + b.shape[0] - inter
    if union == 0:
        return 0.0
    return (union - inter) / union


@njit(cache=True)
def dice(a, b):
    inter = _intersection_size(a, b)
    total = a.shape[0] + b.shape[0]
    if total == 0:
        return 0.0
    return (total - 2 * inter) / total


@njit(cache=True)
def jaccard_many(q, flat, indptr):
    count = indptr.shape[0] - 1
    out = np.empty(count, dtype=np.float64)
    for k in range(count):
        out[k] = jaccard(q, flat[indptr[k]:indptr[k + 1]])
    return out


@njit(cache=True)
def dice_many(q, flat, indptr):
    count = indptr.shape[0] - 1
    out = np.empty(count, dtype=np.float64)
    for k in range(count):
        out[k] = dice(q, flat[indptr[k]:indptr[k + 1]])
    return out


@njit(cache=True, inline="always")
def _delta_block_size(a, b):
    # Encoded size of the run "varint count, then deltas" for a \ b.
    count = 0
    size = 0
    prev = 0
    i = 0
    j = 0
    while i < a.shape[0]:
        if j < b.shape[0] and b[j] < a[i]:
            j += 1
        elif j < b.shape[0] and b[j] == a[i]:
            i += 1
            j += 1
        else:
            size += vlen(a[i] - prev)
            prev = a[i]
            count += 1
            i += 1
    return vlen(count) + size


@njit(cache=True)
def set_diff_size(target, ref):
    return _delta_block_size(target, ref) + _delta_block_size(ref, target)


@njit(cache=True)
def set_diff_sizes_many(ref, flat, indptr):
    count = indptr.shape[0] - 1
    out = np.empty(count, dtype=np.int64)
    for k in range(count):
        out[k] = set_diff_size(flat[indptr[k]:indptr[k + 1]], ref)
    return out


@njit(cache=True, inline="always")
def _put_delta_block(out, p, a, b):
    count = 0
    i = 0
    j = 0
    while i < a.shape[0]:
        if j < b.shape[0] and b[j] < a[i]:
            j += 1
        elif j < b.shape[0] and b[j] == a[i]:
            i += 1
            j += 1
        else:
            count += 1
            i += 1
    p = vput(out, p, count)
    prev = 0
    i = 0
    j = 0
    while i < a.shape[0]:
        if j < b.shape[0] and b[j] < a[i]:
            j += 1
        elif j < b.shape[0] and b[j] == a[i]:
            i += 1
            j += 1
        else:
            p = vput(out, p, a[i] - prev)
            prev = a[i]
            i += 1
    return p


@njit(cache=True)
def set_diff_encode(target, ref):
    out = np.empty(set_diff_size(target, ref), dtype=np.uint8)
    p = _put_delta_block(out, 0, target, ref)
    _put_delta_block(out, p, ref, target)
    return out


@njit(cache=True, inline="always")
def _read_delta_block(buf, pos, end):
    count, pos = vget(buf, pos, end)
    vals = np.empty(count, dtype=np.int64)
    prev = 0
    for k in range(count):
        d, pos = vget(buf, pos, end)
        if k > 0 and d == 0:
            raise ValueError("set-diff members not strictly increasing")
        prev += d
        vals[k] = prev
    return vals, pos


@njit(cache=True)
def set_diff_decode(buf, pos, end, ref):
    added, pos = _read_delta_block(buf, pos, end)
    removed, pos = _read_delta_block(buf, pos, end)
    out = np.empty(ref.shape[0] + added.shape[0], dtype=np.int64)
    o = 0
    i = 0
    j = 0
    for x in ref:
        if j < removed.shape[0] and removed[j] < x:
            raise ValueError("set-diff removes a non-member")
        if j < removed.shape[0] and removed[j] == x:
            j += 1
            continue
        while i < added.shape[0] and added[i] < x:
            out[o] = added[i]
            o += 1
            i += 1
        if i < added.shape[0] and added[i] == x:
            raise ValueError("set-diff adds an existing member")
        out[o] = x
        o += 1
    if j != removed.shape[0]:
        raise ValueError("set-diff removes a non-member")
    while i < added.shape[0]:
        out[o] = added[i]
        o += 1
        i += 1
    return out[:o].copy(), pos
