"""Divisive hierarchical clustering (the cluster tree).

Each cluster is a metric ball around one of its own members. A cluster is
split by picking two poles, the member ``l`` farthest from the center and
the member ``r`` farthest from ``l``, and sending every member to the
nearer pole (ties go left). Clusters hold contiguous ranges of a shared
permutation, so a subtree's members are ``permutation[offset:offset+n]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import InvalidInputError
from .metrics import CompressiveMetric, Packed


@dataclass
class PartitionCriteria:
    """When to stop partitioning.

    A cluster is split only if it has more than one member, at least
    ``min_cardinality`` members, depth below ``max_depth`` and radius at
    least ``min_radius`` (the optional limits are ignored when ``None``).
    """

    min_cardinality: int = 1
    max_depth: int | None = None
    min_radius: float | None = None

    def __post_init__(self):
        if self.min_cardinality < 1:
            raise InvalidInputError("min_cardinality must be >= 1")

    def allows(self, cardinality: int, depth: int, radius: float) -> bool:
        if cardinality <= 1 or cardinality < self.min_cardinality:
            return False
        if self.max_depth is not None and depth >= self.max_depth:
            return False
        if self.min_radius is not None and radius < self.min_radius:
            return False
        return True


@dataclass(eq=False, slots=True)
class Cluster:
    offset: int
    cardinality: int
    depth: int
    center: int
    radius: float
    lfd: float = 0.0
    # Sum of distances from the center to every member.
    distance_sum: float = 0.0
    # Radius under the query metric, when it differs from the build metric.
    aux_radius: float | None = None
    left: "Cluster | None" = None
    right: "Cluster | None" = None
    poles: tuple[int, int] | None = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def children(self) -> tuple["Cluster", ...]:
        return () if self.left is None else (self.left, self.right)

    @property
    def key(self) -> tuple[int, int]:
        # Unique within a tree: a child never has both its parent's offset
        # and cardinality.
        return (self.offset, self.cardinality)

    def preorder(self) -> Iterator["Cluster"]:
        stack = [self]
        while stack:
            c = stack.pop()
            yield c
            if c.left is not None:
                stack.append(c.right)
                stack.append(c.left)

    def postorder(self) -> Iterator["Cluster"]:
        stack = [(self, False)]
        while stack:
            c, expanded = stack.pop()
            if expanded or c.left is None:
                yield c
            else:
                stack.append((c, True))
                stack.append((c.right, False))
                stack.append((c.left, False))


@dataclass(eq=False)
class Tree:
    root: Cluster | None
    points: Packed
    metric: CompressiveMetric
    permutation: np.ndarray
    ids: np.ndarray
    seed: int = 0
    criteria: PartitionCriteria = field(default_factory=PartitionCriteria)
    aux_metric: CompressiveMetric | None = None

    def __len__(self):
        return len(self.permutation)

    def members(self, cluster: Cluster) -> np.ndarray:
        return self.permutation[cluster.offset:cluster.offset + cluster.cardinality]

    def clusters(self) -> Iterator[Cluster]:
        return iter(()) if self.root is None else self.root.preorder()

    def leaves(self) -> Iterator[Cluster]:
        return (c for c in self.clusters() if c.is_leaf)

    def depth(self) -> int:
        return max((c.depth for c in self.clusters()), default=0)


def _argmax_smallest(values: np.ndarray, ids: np.ndarray) -> int:
    top = values.max()
    return int(ids[values == top].min())


def geometric_median(points: Packed, ids: Sequence[int]) -> int:
    """Member of ``ids`` minimising the summed distance to the others.

    Ties go to the smallest id.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        raise InvalidInputError("geometric median of an empty set")
    if ids.size == 1:
        return int(ids[0])
    sums = np.array([points.distances(int(i), ids).sum() for i in ids])
    best = sums.min()
    return int(ids[sums == best].min())


def select_poles(points: Packed, ids: np.ndarray, rng: np.random.Generator):
    """Return ``(center, l, r, d_center)`` for a cluster with members ``ids``."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size < 2:
        raise InvalidInputError("pole selection needs at least two points")
    n_seeds = math.isqrt(ids.size - 1) + 1  # ceil(sqrt(n))
    seeds = rng.choice(ids, n_seeds, replace=False)
    center = geometric_median(points, seeds)
    d_center = points.distances(center, ids)
    left = _argmax_smallest(d_center, ids)
    d_left = points.distances(left, ids)
    right = _argmax_smallest(d_left, ids)
    return center, left, right, d_center, d_left


def split_members(points: Packed, members: np.ndarray, right: int, d_left: np.ndarray):
    """Members nearer the left pole (ties included) and the rest."""
    d_right = points.distances(right, members)
    to_left = d_left <= d_right
    return members[to_left], members[~to_left]


def local_fractal_dimension(distances: np.ndarray, radius: float) -> float:
    """log2 of the member count within ``radius`` over the count within ``radius / 2``."""
    if radius <= 0 or distances.size == 0:
        return 0.0
    outer = np.count_nonzero(distances <= radius)
    inner = np.count_nonzero(distances <= radius / 2)
    return math.log2(outer / inner)


def cluster_lfd(tree: Tree, cluster: Cluster) -> float:
    members = tree.members(cluster)
    return local_fractal_dimension(tree.points.distances(cluster.center, members), cluster.radius)


def build_tree(
    payloads: Sequence | Packed,
    metric: CompressiveMetric,
    criteria: PartitionCriteria | None = None,
    seed: int = 0,
    ids: Sequence[int] | None = None,
    aux_metric: CompressiveMetric | None = None,
) -> Tree:
    """Partition a dataset into a binary cluster tree.

    ``aux_metric``, when given, is a second (query) metric; every cluster
    then also records its radius under that metric.
    """
    criteria = criteria or PartitionCriteria()
    points = payloads if isinstance(payloads, Packed) else metric.pack(
        [metric.coerce(p) for p in payloads])
    n = len(points)
    ids = np.arange(n, dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
    if ids.shape != (n,):
        raise InvalidInputError("ids must match the number of points")
    if len(np.unique(ids)) != n:
        raise InvalidInputError("ids must be unique")
    perm = np.arange(n, dtype=np.int64)
    tree = Tree(None, points, metric, perm, ids, seed, criteria, aux_metric)
    if n == 0:
        return tree

    rng = np.random.default_rng(seed)
    tree.root = Cluster(offset=0, cardinality=n, depth=0, center=0, radius=0.0)
    stack = [tree.root]
    while stack:
        c = stack.pop()
        members = perm[c.offset:c.offset + c.cardinality]
        if c.cardinality == 1:
            c.center = int(members[0])
            _set_aux_radius(tree, c, members)
            continue

        center, left, right, d_center, d_left = select_poles(points, members, rng)
        c.center = center
        c.radius = float(d_center.max())
        c.distance_sum = float(d_center.sum())
        c.lfd = local_fractal_dimension(d_center, c.radius)
        _set_aux_radius(tree, c, members)
        # An all-duplicate cluster (radius 0) has nothing to split.
        if c.radius == 0 or not criteria.allows(c.cardinality, c.depth, c.radius):
            continue

        lhs, rhs = split_members(points, members, right, d_left)
        n_left = lhs.size
        members[:n_left] = lhs
        members[n_left:] = rhs
        c.poles = (left, right)
        c.left = Cluster(c.offset, n_left, c.depth + 1, int(lhs[0]), 0.0)
        c.right = Cluster(c.offset + n_left, rhs.size, c.depth + 1, int(rhs[0]), 0.0)
        stack.append(c.right)
        stack.append(c.left)
    return tree


def _set_aux_radius(tree: Tree, c: Cluster, members: np.ndarray) -> None:
    if tree.aux_metric is None:
        return
    if c.cardinality == 1:
        c.aux_radius = 0.0
        return
    pts = tree.points
    d = tree.aux_metric.distances(pts[c.center], [pts[int(i)] for i in members])
    c.aux_radius = float(d.max())
