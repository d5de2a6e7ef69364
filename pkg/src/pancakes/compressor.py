"""Choose unitary or recursive compression for every cluster and trim the tree.

Unitary compression stores each non-center member of a cluster as an
encoding against the cluster center. Recursive compression stores the two
child centers as encodings against the parent center plus the cheaper
form of each child. Costs are measured in encoded bytes. Working
bottom-up, a cluster whose recursive cost exceeds its unitary cost loses
its descendants and becomes a unitary leaf.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .tree import Cluster, Tree

UNITARY = "unitary"
RECURSIVE = "recursive"


@dataclass
class CostRecord:
    unitary_cost: int
    recursive_cost: int | None
    min_cost: int
    mode: str
    # Same quantities in distance units, for comparison with the byte costs.
    unitary_distance: float
    recursive_distance: float | None
    min_distance: float
    # Byte sizes of the child-center encodings (internal nodes only).
    center_edge_costs: tuple[int, int] | None = None


@dataclass
class CompressionPlan:
    records: dict[tuple[int, int], CostRecord]
    tree: Tree  # trimmed copy

    def __getitem__(self, cluster: Cluster) -> CostRecord:
        return self.records[cluster.key]

    @property
    def root(self) -> CostRecord | None:
        return None if self.tree.root is None else self[self.tree.root]

    @property
    def total_cost(self) -> int:
        return 0 if self.root is None else self.root.min_cost


def unitary_cost(tree: Tree, cluster: Cluster) -> int:
    """Bytes needed to encode every non-center member against the center."""
    members = tree.members(cluster)
    others = members[members != cluster.center]
    if others.size == 0:
        return 0
    return int(tree.points.encoded_sizes(cluster.center, others).sum())


def compress(tree: Tree) -> CompressionPlan:
    """Compute costs bottom-up and return the plan with a trimmed tree copy.

    Equal costs keep the recursive form.
    """
    records: dict[tuple[int, int], CostRecord] = {}
    if tree.root is None:
        return CompressionPlan(records, replace(tree))

    pts = tree.points
    metric = tree.metric
    for c in tree.root.postorder():
        u_cost = unitary_cost(tree, c)
        rec = CostRecord(u_cost, None, u_cost, UNITARY, c.distance_sum, None, c.distance_sum)
        if not c.is_leaf:
            lc, rc = c.left, c.right
            ref = pts[c.center]
            edge_l = metric.encoded_size(pts[lc.center], ref)
            edge_r = metric.encoded_size(pts[rc.center], ref)
            lrec, rrec = records[lc.key], records[rc.key]
            rec.recursive_cost = edge_l + lrec.min_cost + edge_r + rrec.min_cost
            rec.recursive_distance = (
                float(metric.distance(pts[lc.center], ref)) + lrec.min_distance
                + float(metric.distance(pts[rc.center], ref)) + rrec.min_distance)
            rec.center_edge_costs = (edge_l, edge_r)
            if rec.recursive_cost <= rec.unitary_cost:
                rec.min_cost = rec.recursive_cost
                rec.min_distance = rec.recursive_distance
                rec.mode = RECURSIVE
        records[c.key] = rec

    return CompressionPlan(records, _trimmed_copy(tree, records))


def _trimmed_copy(tree: Tree, records) -> Tree:
    def copy(c: Cluster) -> Cluster:
        return replace(c, left=None, right=None)

    root = copy(tree.root)
    stack = [(tree.root, root)]
    while stack:
        src, dst = stack.pop()
        if src.is_leaf or records[src.key].mode == UNITARY:
            continue
        dst.left, dst.right = copy(src.left), copy(src.right)
        stack.append((src.left, dst.left))
        stack.append((src.right, dst.right))
    return replace(tree, root=root)


def plan_summary(plan: CompressionPlan) -> dict:
    leaves = [c for c in plan.tree.clusters() if c.is_leaf]
    depths = np.array([c.depth for c in leaves]) if leaves else np.zeros(1)
    return {
        "total_cost": plan.total_cost,
        "leaves": len(leaves),
        "leaf_depth_min": int(depths.min()),
        "leaf_depth_max": int(depths.max()),
        "mean_leaf_cardinality": float(np.mean([c.cardinality for c in leaves])) if leaves else 0.0,
    }
