"""Binary index file: trimmed tree, node table and delta-encoded blobs.

See ``format.md`` at the repository root for the byte layout. The node
table and the blob section are both written in pre-order, so any subtree
is a contiguous run of node records and a contiguous byte range of blob.
"""

from __future__ import annotations

import math
import mmap
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .compressor import RECURSIVE, CompressionPlan
from .errors import IntegrityError, UnsupportedMetricError
from .metrics import get_metric
from .varint import decode_varint, encode_varint

MAGIC = b"PCKS"
VERSION = 1
NO_CHILD = np.iinfo(np.uint64).max
FLAG_AUX_RADIUS = 1

_HEADER = struct.Struct("<4sHHQQQQQQQQBIid")

NODE_DTYPE = np.dtype([
    ("right", "<u8"),
    ("center_off", "<u8"),
    ("center_len", "<u4"),
    ("mode", "u1"),
    ("reserved", "u1"),
    ("depth", "<u2"),
    ("cardinality", "<u4"),
    ("perm_offset", "<u4"),
    ("center_rank", "<u4"),
    ("pad", "<u4"),
    ("members_off", "<u8"),
    ("members_len", "<u8"),
    ("radius", "<f8"),
    ("aux_radius", "<f8"),
    ("lfd", "<f4"),
    ("pad2", "<u4"),
])
assert NODE_DTYPE.itemsize == 80


def _short_str(s: str) -> bytes:
    raw = s.encode("ascii")
    if len(raw) > 255:
        raise ValueError("name too long")
    return bytes([len(raw)]) + raw


def serialize_index(plan: CompressionPlan) -> bytes:
    tree = plan.tree
    metric = tree.metric
    if metric.encoding_kind is None:
        raise UnsupportedMetricError(f"metric {metric.name!r} has no codec")
    pts = tree.points
    perm = tree.permutation
    nodes = list(tree.clusters())
    index_of = {id(c): i for i, c in enumerate(nodes)}

    table = np.zeros(len(nodes), dtype=NODE_DTYPE)
    blob = bytearray()
    data_len = 0
    parent_center = {}
    for i, c in enumerate(nodes):
        row = table[i]
        row["right"] = NO_CHILD if c.is_leaf else index_of[id(c.right)]
        row["mode"] = 0 if c.is_leaf else 1
        row["depth"] = c.depth
        row["cardinality"] = c.cardinality
        row["perm_offset"] = c.offset
        members = tree.members(c)
        row["center_rank"] = c.offset + int(np.flatnonzero(members == c.center)[0])
        row["radius"] = c.radius
        row["aux_radius"] = c.radius if c.aux_radius is None else c.aux_radius
        row["lfd"] = c.lfd
        if i > 0:
            enc = metric.encode(pts[c.center], pts[parent_center[id(c)]])
            row["center_off"] = len(blob)
            row["center_len"] = len(enc)
            blob += enc
        if c.is_leaf:
            row["members_off"] = len(blob)
            ref = pts[c.center]
            start = len(blob)
            for m in members:
                if m != c.center:
                    blob += metric.encode(pts[int(m)], ref)
            row["members_len"] = len(blob) - start
            data_len += len(blob) - start
        else:
            parent_center[id(c.left)] = c.center
            parent_center[id(c.right)] = c.center
        if plan.records and not c.is_leaf:
            assert plan.records[c.key].mode == RECURSIVE

    ids_in_order = tree.ids[perm] if len(perm) else np.zeros(0, dtype=np.int64)
    id_dtype = "<u4" if (ids_in_order.size == 0 or ids_in_order.max() < 2**32) else "<u8"
    id_bytes = ids_in_order.astype(id_dtype).tobytes()

    root_raw = b"" if tree.root is None else metric.payload_bytes(pts[tree.root.center])
    query = tree.aux_metric.name if tree.aux_metric is not None else ""
    crit = tree.criteria
    tail = (_short_str(metric.name) + _short_str(query) + bytes([np.dtype(id_dtype).itemsize])
            + encode_varint(len(root_raw)) + root_raw)
    header_len = _HEADER.size + len(tail)
    table_off = header_len
    ids_off = table_off + table.nbytes
    blob_off = ids_off + len(id_bytes)
    header = _HEADER.pack(
        MAGIC, VERSION, FLAG_AUX_RADIUS if query else 0, tree.seed, len(perm), len(nodes),
        table_off, ids_off, blob_off, len(blob), data_len, 0,
        crit.min_cardinality, -1 if crit.max_depth is None else crit.max_depth,
        math.nan if crit.min_radius is None else crit.min_radius,
    )
    return header + tail + table.tobytes() + id_bytes + bytes(blob)


def write_index(plan: CompressionPlan, path: str | os.PathLike) -> int:
    """Write the index for a compression plan; return the byte count."""
    raw = serialize_index(plan)
    Path(path).write_bytes(raw)
    return len(raw)


@dataclass
class IndexStats:
    file_bytes: int
    data_bytes: int
    tree_bytes: int
    points: int
    nodes: int
    leaves: int
    metric: str
    query_metric: str
    seed: int


class CompressedIndex:
    """Read-only view over an index file or byte string."""

    def __init__(self, raw, *, trace: bool = False):
        self._raw = raw
        buf = memoryview(raw)
        if len(buf) < _HEADER.size:
            raise IntegrityError("file too short for header")
        (magic, version, flags, seed, n_points, n_nodes, table_off, ids_off, blob_off,
         blob_len, data_len, _, min_card, max_depth, min_radius) = _HEADER.unpack_from(buf, 0)
        if magic != MAGIC:
            raise IntegrityError(f"bad magic {magic!r}")
        if version != VERSION:
            raise IntegrityError(f"unsupported version {version}")
        pos = _HEADER.size
        name_len = buf[pos]
        self.metric_name = bytes(buf[pos + 1:pos + 1 + name_len]).decode("ascii")
        pos += 1 + name_len
        q_len = buf[pos]
        query_name = bytes(buf[pos + 1:pos + 1 + q_len]).decode("ascii")
        pos += 1 + q_len
        id_width = buf[pos]
        pos += 1
        root_len, pos = decode_varint(buf, pos)
        root_raw = bytes(buf[pos:pos + root_len])
        if pos + root_len != table_off or blob_off + blob_len != len(buf):
            raise IntegrityError("section offsets inconsistent with file size")

        self.metric = get_metric(self.metric_name)
        self.query_metric = get_metric(query_name) if query_name else self.metric
        self.uses_aux_radius = bool(flags & FLAG_AUX_RADIUS)
        self.seed = seed
        self.n_points = n_points
        self.n_nodes = n_nodes
        self.data_bytes = data_len
        self.criteria = (min_card, None if max_depth < 0 else max_depth,
                         None if math.isnan(min_radius) else min_radius)
        self.nodes = np.frombuffer(raw, dtype=NODE_DTYPE, count=n_nodes, offset=table_off)
        id_dtype = {4: "<u4", 8: "<u8"}[id_width]
        self.ids = np.frombuffer(raw, dtype=id_dtype, count=n_points, offset=ids_off).astype(np.int64)
        self.blob = np.frombuffer(raw, dtype=np.uint8, count=blob_len, offset=blob_off)
        self.root_payload = self.metric.payload_from_bytes(root_raw) if n_nodes else None
        self.file_bytes = len(buf)

        self.parent = np.full(n_nodes, -1, dtype=np.int64)
        self.subtree_end = np.arange(1, n_nodes + 1, dtype=np.int64)
        internal = np.flatnonzero(self.nodes["mode"] == 1)
        right = self.nodes["right"].astype(np.int64)
        self.parent[internal + 1] = internal
        self.parent[right[internal]] = internal
        # children finish before parents in reverse pre-order
        for i in internal[::-1]:
            self.subtree_end[i] = self.subtree_end[right[i]]

        self.trace = trace
        self.read_log: list[tuple[int, int]] = []

    @classmethod
    def open(cls, path: str | os.PathLike, *, trace: bool = False) -> "CompressedIndex":
        with open(path, "rb") as fh:
            size = os.fstat(fh.fileno()).st_size
            if size == 0:
                raise IntegrityError("empty index file")
            raw = mmap.mmap(fh.fileno(), 0, access=mmap.ACCESS_READ)
        return cls(raw, trace=trace)

    # -- structure ---------------------------------------------------------

    def is_leaf(self, node: int) -> bool:
        return self.nodes["mode"][node] == 0

    def children(self, node: int) -> tuple[int, int]:
        return node + 1, int(self.nodes["right"][node])

    def cardinality(self, node: int) -> int:
        return int(self.nodes["cardinality"][node])

    def radius(self, node: int) -> float:
        field = "aux_radius" if self.uses_aux_radius else "radius"
        return float(self.nodes[field][node])

    def leaves(self, node: int = 0) -> np.ndarray:
        lo, hi = node, self.subtree_end[node]
        modes = self.nodes["mode"][lo:hi]
        return lo + np.flatnonzero(modes == 0)

    def stats(self) -> IndexStats:
        return IndexStats(
            file_bytes=self.file_bytes, data_bytes=self.data_bytes,
            tree_bytes=self.file_bytes - self.data_bytes, points=self.n_points,
            nodes=self.n_nodes, leaves=int(np.count_nonzero(self.nodes["mode"] == 0)),
            metric=self.metric_name, query_metric=self.query_metric.name, seed=self.seed)

    def _log(self, start: int, length: int):
        if self.trace:
            self.read_log.append((start, start + length))

    def session(self) -> "Session":
        return Session(self)


class Session:
    """Per-reader decompression state; memoises decoded centers."""

    def __init__(self, index: CompressedIndex):
        self.index = index
        self._centers: dict[int, object] = {}
        self.materialized: set[int] = set()
        self.centers_decoded = 0

    def center(self, node: int):
        idx = self.index
        if node in self._centers:
            return self._centers[node]
        path = []
        cur = node
        while cur not in self._centers and cur > 0:
            path.append(cur)
            cur = int(idx.parent[cur])
        if cur == 0 and 0 not in self._centers:
            if idx.n_nodes == 0:
                raise IntegrityError("empty index has no clusters")
            self._centers[0] = idx.root_payload
            self._note_center(0)
        ref = self._centers[cur]
        for n in reversed(path):
            row = idx.nodes[n]
            start, length = int(row["center_off"]), int(row["center_len"])
            idx._log(start, length)
            try:
                ref, end = idx.metric.decode_at(idx.blob, start, start + length, ref)
            except ValueError as exc:
                raise IntegrityError(f"bad center encoding: {exc}", n) from None
            if end != start + length:
                raise IntegrityError("center encoding length mismatch", n)
            self._centers[n] = ref
            self.centers_decoded += 1
            self._note_center(n)
        return ref

    def _note_center(self, node: int):
        self.materialized.add(int(self.index.nodes["center_rank"][node]))

    def leaf_points(self, node: int):
        """Decode a unitary leaf; return ``(ids, payloads)`` in permutation order."""
        idx = self.index
        row = idx.nodes[node]
        if row["mode"] != 0:
            raise ValueError(f"node {node} is not a leaf")
        center = self.center(node)
        start, length = int(row["members_off"]), int(row["members_len"])
        card = int(row["cardinality"])
        idx._log(start, length)
        try:
            others, end = idx.metric.decode_run(idx.blob, start, start + length, card - 1, center)
        except ValueError as exc:
            raise IntegrityError(f"bad member encoding: {exc}", node) from None
        if end != start + length:
            raise IntegrityError("member block length mismatch", node)
        offset = int(row["perm_offset"])
        rank = int(row["center_rank"]) - offset
        payloads = list(others)
        payloads.insert(rank, center)
        self.materialized.update(range(offset, offset + card))
        return idx.ids[offset:offset + card], payloads

    def decompress(self, node: int = 0) -> list[tuple[int, object]]:
        """Materialise every point under ``node`` as ``(id, payload)`` pairs."""
        out = []
        for leaf in self.index.leaves(node):
            ids, payloads = self.leaf_points(int(leaf))
            out.extend(zip(ids.tolist(), payloads))
        return out

    def get_point(self, point_id: int):
        idx = self.index
        where = np.flatnonzero(idx.ids == point_id)
        if where.size == 0:
            raise KeyError(point_id)
        pos = int(where[0])
        leaves = idx.leaves(0)
        offs = idx.nodes["perm_offset"][leaves].astype(np.int64)
        leaf = int(leaves[np.searchsorted(offs, pos, side="right") - 1])
        ids, payloads = self.leaf_points(leaf)
        return payloads[pos - int(idx.nodes["perm_offset"][leaf])]

    def decompressed_fraction(self) -> float:
        n = self.index.n_points
        return len(self.materialized) / n if n else 0.0


def read_index(path: str | os.PathLike, *, trace: bool = False) -> CompressedIndex:
    return CompressedIndex.open(path, trace=trace)


def decompress_cluster(index: CompressedIndex, node: int = 0) -> list[tuple[int, object]]:
    return index.session().decompress(node)


def decompressed_fraction(session: Session) -> float:
    return session.decompressed_fraction()
