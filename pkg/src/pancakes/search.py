"""Exact rho-NN and k-NN search over a cluster tree.

The same algorithms run over a compressed index (leaves are decoded on
demand) or over an in-memory tree with raw payloads. Pruning uses the
usual ball bounds: for a cluster with center ``c`` and radius ``r``, every
member ``x`` satisfies ``d(q, c) - r <= d(q, x) <= d(q, c) + r``.

Results are ``(id, distance)`` pairs sorted by distance, then id. For
k-NN exactly ``k`` hits are kept, so ties at the k-th distance resolve to
the smallest ids.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, UnsupportedMetricError
from .metrics import CompressiveMetric
from .store import CompressedIndex, Session
from .tree import Cluster, Tree

FLOAT_SLACK = 1e-9


@dataclass
class HitSet:
    hits: list[tuple[int, float]]
    distance_computations: int = 0
    clusters_visited: int = 0
    points_decompressed: int = 0
    total_points: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def ids(self) -> list[int]:
        return [i for i, _ in self.hits]

    @property
    def distances(self) -> list[float]:
        return [d for _, d in self.hits]

    @property
    def decompressed_fraction(self) -> float:
        return self.points_decompressed / self.total_points if self.total_points else 0.0

    def __len__(self):
        return len(self.hits)


# --------------------------------------------------------------------------
# views


class CompressedView:
    """Search adapter over a compressed index; one per query."""

    def __init__(self, index: CompressedIndex, session: Session | None = None):
        self.index = index
        self.session = session or index.session()
        self.metric: CompressiveMetric = index.query_metric
        self.root = 0 if index.n_nodes else None
        self.n = index.n_points

    def is_leaf(self, node):
        return self.index.is_leaf(node)

    def children(self, node):
        return self.index.children(node)

    def cardinality(self, node):
        return self.index.cardinality(node)

    def radius(self, node):
        return self.index.radius(node)

    def root_lfd(self):
        return float(self.index.nodes["lfd"][0]) if self.index.n_nodes else 0.0

    def center(self, node):
        return self.session.center(node)

    def leaf_points(self, node):
        return self.session.leaf_points(node)

    def materialized(self) -> int:
        return len(self.session.materialized)

    def fresh(self) -> "CompressedView":
        return CompressedView(self.index)


class TreeView:
    """Search adapter over an in-memory tree (uncompressed payloads)."""

    def __init__(self, tree: Tree):
        self.tree = tree
        self.metric = tree.aux_metric or tree.metric
        self.root = tree.root
        self.n = len(tree)
        self._touched: set[int] = set()

    def is_leaf(self, node: Cluster):
        return node.is_leaf

    def children(self, node: Cluster):
        return node.left, node.right

    def cardinality(self, node: Cluster):
        return node.cardinality

    def radius(self, node: Cluster):
        return node.radius if node.aux_radius is None or self.tree.aux_metric is None else node.aux_radius

    def root_lfd(self):
        return self.root.lfd if self.root is not None else 0.0

    def center(self, node: Cluster):
        self._touched.add(node.center)
        return self.tree.points[node.center]

    def leaf_points(self, node: Cluster):
        members = self.tree.members(node)
        self._touched.update(members.tolist())
        pts = self.tree.points
        return self.tree.ids[members], [pts[int(i)] for i in members]

    def materialized(self) -> int:
        return len(self._touched)

    def fresh(self) -> "TreeView":
        return TreeView(self.tree)


def as_view(index):
    if isinstance(index, (CompressedView, TreeView)):
        return index
    if isinstance(index, CompressedIndex):
        return CompressedView(index)
    if isinstance(index, Tree):
        return TreeView(index)
    raise TypeError(f"cannot search over {type(index).__name__}")


def _coerce_query(metric: CompressiveMetric, q):
    if metric.kind == "sequence":
        if not isinstance(q, (bytes, bytearray, str)):
            raise UnsupportedMetricError(
                f"{metric.name} index needs a sequence query, got {type(q).__name__}")
    elif metric.kind == "set":
        if isinstance(q, (bytes, bytearray, str)):
            raise UnsupportedMetricError(f"{metric.name} index needs a set query")
    return metric.coerce(q)


class _Search:
    """Shared per-query state: counters and bound arithmetic."""

    def __init__(self, view, q):
        self.view = view
        self.metric = view.metric
        self.q = _coerce_query(self.metric, q)
        self.slack = 0.0 if self.metric.integer_valued else FLOAT_SLACK
        self.distance_computations = 0
        self.clusters_visited = 0
        self.t = self.metric.to_metric

    def center_distance(self, node) -> float:
        self.clusters_visited += 1
        self.distance_computations += 1
        return self.metric.distance(self.q, self.view.center(node))

    def bounds(self, node, d: float) -> tuple[float, float]:
        """Lower and upper bounds on member distances, in true-metric units."""
        td, tr = self.t(d), self.t(self.view.radius(node))
        return max(0.0, td - tr), td + tr

    def scan(self, node):
        ids, payloads = self.view.leaf_points(node)
        self.distance_computations += len(payloads)
        return ids, self.metric.distances(self.q, payloads)

    def result(self, hits) -> HitSet:
        return HitSet(
            hits=hits,
            distance_computations=self.distance_computations,
            clusters_visited=self.clusters_visited,
            points_decompressed=self.view.materialized(),
            total_points=self.view.n,
        )

    def check_pruned(self, node, bound: float):
        """Debug: decode a pruned subtree and confirm nothing beats ``bound``."""
        view = self.view.fresh()
        stack = [node]
        while stack:
            n = stack.pop()
            if view.is_leaf(n):
                _, payloads = view.leaf_points(n)
                ds = self.metric.distances(self.q, payloads)
                if len(ds) and self.t(float(np.min(ds))) < bound - self.slack:
                    raise AssertionError(f"unsound prune at {n}: {np.min(ds)} < {bound}")
            else:
                stack.extend(view.children(n))


def _sorted_hits(ids, dists) -> list[tuple[int, float]]:
    pairs = sorted(zip(dists, ids))
    return [(int(i), _num(d)) for d, i in pairs]


def _num(d):
    d = float(d)
    return int(d) if d.is_integer() else d


# --------------------------------------------------------------------------
# rho-NN


def rnn_search(index, q, radius: float, *, debug: bool = False) -> HitSet:
    """All points within ``radius`` of ``q``."""
    if radius < 0:
        raise InvalidInputError("radius must be non-negative")
    s = _Search(as_view(index), q)
    return s.result(_rnn(s, radius, debug))


def _rnn(s: _Search, radius: float, debug: bool = False):
    view = s.view
    if view.root is None:
        return []
    limit = s.t(radius) + s.slack
    ids_out, d_out = [], []
    stack = [(view.root, s.center_distance(view.root))]
    while stack:
        node, d = stack.pop()
        lower, _ = s.bounds(node, d)
        if lower > limit:
            if debug:
                s.check_pruned(node, s.t(radius))
            continue
        if view.is_leaf(node):
            ids, ds = s.scan(node)
            keep = ds <= radius
            ids_out.extend(np.asarray(ids)[keep].tolist())
            d_out.extend(np.asarray(ds)[keep].tolist())
        else:
            for child in view.children(node):
                stack.append((child, s.center_distance(child)))
    return _sorted_hits(ids_out, d_out)


# --------------------------------------------------------------------------
# k-NN


def _check_k(view, k: int) -> int:
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    return min(k, view.n)


def knn_repeated_rnn(index, q, k: int, *, growth: float = 2.0) -> HitSet:
    """k-NN by rho-NN passes with a growing radius.

    The first radius is that of the deepest cluster on the greedy descent
    toward ``q`` that still holds at least ``k`` points.
    """
    view = as_view(index)
    s = _Search(view, q)
    if s.metric.kind == "set":
        raise UnsupportedMetricError(
            f"repeated rho-NN is not supported under {s.metric.name}: radius growth "
            "cannot reliably reach more points for set distances")
    if growth <= 1:
        raise InvalidInputError("growth must exceed 1")
    if view.root is None:
        return s.result([])
    k = _check_k(view, k)

    node = view.root
    d_root = s.center_distance(node)
    rho = view.radius(node)
    while not view.is_leaf(node):
        kids = [(s.center_distance(c), c) for c in view.children(node)]
        kids = [(d, c) for d, c in kids if view.cardinality(c) >= k]
        if not kids:
            break
        _, node = min(kids, key=lambda t: t[0])
        rho = view.radius(node)
    if rho <= 0:
        rho = 1.0 if s.metric.integer_valued else max(view.radius(view.root) / view.n, 1e-6)
    everything = d_root + view.radius(view.root)

    passes = 0
    while True:
        passes += 1
        hits = _rnn(s, rho)
        if len(hits) >= k or rho >= everything:
            break
        rho *= growth
    out = s.result(hits[:k])
    out.extra["passes"] = passes
    out.extra["final_radius"] = rho
    return out


def weighted_select(values: np.ndarray, weights: np.ndarray, k: float) -> float:
    """Smallest ``v`` in ``values`` with ``sum(weights[values <= v]) >= k``.

    Three-way QuickSelect carrying weights; returns ``inf`` if the total
    weight is below ``k``.
    """
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.sum() < k:
        return math.inf
    while True:
        pivot = values[len(values) // 2]
        less = values < pivot
        equal = values == pivot
        w_less = weights[less].sum()
        if w_less >= k:
            values, weights = values[less], weights[less]
            continue
        w_eq = weights[equal].sum()
        if w_less + w_eq >= k:
            return float(pivot)
        k -= w_less + w_eq
        greater = ~(less | equal)
        values, weights = values[greater], weights[greater]


def knn_breadth_first(index, q, k: int, *, debug: bool = False) -> HitSet:
    """Level-by-level k-NN, pruning each level against a weighted k-th bound."""
    view = as_view(index)
    s = _Search(view, q)
    if view.root is None:
        return s.result([])
    k = _check_k(view, k)

    clusters = [(view.root, s.center_distance(view.root))]
    pt_ids: list[int] = []
    pt_d: list[float] = []
    pt_t = np.zeros(0)
    levels = 0
    while clusters:
        levels += 1
        bounds = np.array([s.bounds(n, d) for n, d in clusters]).reshape(-1, 2)
        card = np.array([view.cardinality(n) for n, _ in clusters], dtype=np.float64)
        tau = weighted_select(np.concatenate([bounds[:, 1], pt_t]),
                              np.concatenate([card, np.ones(len(pt_t))]), k)
        limit = tau + s.slack
        keep_pts = pt_t <= limit
        pt_t = pt_t[keep_pts]
        pt_ids = [i for i, kp in zip(pt_ids, keep_pts) if kp]
        pt_d = [d for d, kp in zip(pt_d, keep_pts) if kp]

        nxt = []
        for (node, d), (lower, _) in zip(clusters, bounds):
            if lower > limit:
                if debug:
                    s.check_pruned(node, tau)
                continue
            if view.is_leaf(node):
                ids, ds = s.scan(node)
                pt_ids.extend(np.asarray(ids).tolist())
                pt_d.extend(np.asarray(ds).tolist())
                pt_t = np.concatenate([pt_t, [s.t(float(x)) for x in ds]])
            else:
                for child in view.children(node):
                    nxt.append((child, s.center_distance(child)))
        clusters = nxt
    out = s.result(_sorted_hits(pt_ids, pt_d)[:k])
    out.extra["levels"] = levels
    return out


def knn_depth_first(index, q, k: int, *, debug: bool = False) -> HitSet:
    """Best-first k-NN with a candidate queue and a bounded hit queue."""
    view = as_view(index)
    s = _Search(view, q)
    if view.root is None:
        return s.result([])
    k = _check_k(view, k)

    tie = 0
    d = s.center_distance(view.root)
    candidates = [(s.bounds(view.root, d)[0], tie, view.root)]
    hits: list[tuple[float, int, float]] = []  # max-heap on (distance, id)

    def kth() -> float:
        return s.t(-hits[0][0]) if len(hits) == k else math.inf

    while candidates:
        lower, _, node = heapq.heappop(candidates)
        if lower > kth() + s.slack:
            if debug:
                s.check_pruned(node, kth())
                for lo, _, n in candidates:
                    s.check_pruned(n, kth())
            break
        while not view.is_leaf(node):
            kids = []
            for child in view.children(node):
                dc = s.center_distance(child)
                kids.append((s.bounds(child, dc)[0], dc, child))
            kids.sort(key=lambda t: (t[0], t[1]))
            for lo, _, child in kids[1:]:
                tie += 1
                heapq.heappush(candidates, (lo, tie, child))
            lower, _, node = kids[0]
            if lower > kth() + s.slack:
                node = None
                break
        if node is None:
            continue
        ids, ds = s.scan(node)
        for i, dist in zip(np.asarray(ids).tolist(), np.asarray(ds).tolist()):
            key = (-dist, -i)
            if len(hits) < k:
                heapq.heappush(hits, (*key, dist))
            elif key > hits[0][:2]:
                heapq.heapreplace(hits, (*key, dist))
    return s.result(_sorted_hits([-h[1] for h in hits], [h[2] for h in hits]))


def linear_scan(index, q, *, radius: float | None = None, k: int | None = None) -> HitSet:
    """Brute-force reference: decode everything and rank it."""
    view = as_view(index)
    s = _Search(view, q)
    if view.root is None:
        return s.result([])
    ids_all, d_all = [], []
    stack = [view.root]
    while stack:
        node = stack.pop()
        if view.is_leaf(node):
            ids, ds = s.scan(node)
            ids_all.extend(np.asarray(ids).tolist())
            d_all.extend(np.asarray(ds).tolist())
        else:
            stack.extend(view.children(node))
    hits = _sorted_hits(ids_all, d_all)
    if radius is not None:
        hits = [h for h in hits if h[1] <= radius]
    if k is not None:
        hits = hits[:_check_k(view, k)]
    return s.result(hits)


ALGORITHMS = {
    "rnn": rnn_search,
    "knn-repeated": knn_repeated_rnn,
    "knn-bfs": knn_breadth_first,
    "knn-dfs": knn_depth_first,
}
