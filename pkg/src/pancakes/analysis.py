"""Tree diagnostics and the closed-form compression cost model.

The cost model describes a balanced tree cut into strides of ``L`` levels,
where ``L`` is the (ceiling of the) local fractal dimension. Radii halve in
area every level, so the clusters at the top of stride ``i`` have radius
``r / sqrt(2) ** ((i - 1) * L)``. Recursive compression over ``S`` strides
pays one parent-to-child edge per cluster at that radius. Unitary
compression at the bottom of the last stride pays one member-to-center edge
per remaining point.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InvalidInputError
from .tree import Tree, local_fractal_dimension

SHRINK = math.sqrt(2) / 2


@dataclass(frozen=True)
class CostModelParams:
    r: float
    L: float
    S: int
    n: int = 1

    def __post_init__(self):
        if self.r < 0:
            raise InvalidInputError("root radius must be non-negative")
        if not self.L > 0:
            raise InvalidInputError("fractal dimension must be positive")
        if self.S < 1:
            raise InvalidInputError("stride count must be >= 1")
        if self.n < 1:
            raise InvalidInputError("cardinality must be >= 1")

    @property
    def depth(self) -> int:
        """Levels per stride: the dimension rounded up."""
        return math.ceil(self.L)


def stride_radius(p: CostModelParams, i: int) -> float:
    """Radius of the shallowest clusters in stride ``i`` (1-based)."""
    if not 1 <= i <= p.S:
        raise InvalidInputError(f"stride index {i} outside 1..{p.S}")
    return p.r / math.sqrt(2) ** ((i - 1) * p.depth)


def subtrees_at_stride(p: CostModelParams, i: int) -> int:
    return 2 ** ((i - 1) * p.depth)


def edges_per_subtree(p: CostModelParams) -> int:
    """Edges in a complete binary tree spanning ``L`` levels below its root."""
    return 2 * (2 ** p.depth - 1)


def recursive_model_cost_sum(p: CostModelParams) -> float:
    return sum(stride_radius(p, i) * edges_per_subtree(p) * subtrees_at_stride(p, i)
               for i in range(1, p.S + 1))


def recursive_model_cost(p: CostModelParams) -> float:
    L = p.depth
    half = 2 ** (L / 2)
    return 2 * p.r * (2 ** L - 1) * (2 ** (p.S * L / 2) - 1) / (half - 1)


def unitary_model_cost(p: CostModelParams) -> float:
    leaves = 2 ** (p.S * p.depth)
    if p.n < leaves:
        raise InvalidInputError(f"n={p.n} is too small for {leaves} leaves")
    leaf_radius = p.r / math.sqrt(2) ** (p.S * p.depth)
    return leaves * leaf_radius * (p.n / leaves - 1)


def total_model_cost(p: CostModelParams) -> float:
    return recursive_model_cost(p) + unitary_model_cost(p)


def model_grid(r: float, L: float, n: int, strides: Iterable[int]) -> list[dict]:
    """Model costs for each feasible stride count."""
    rows = []
    for s in strides:
        p = CostModelParams(r, L, s, n)
        if n < 2 ** (s * p.depth):
            continue
        tr, tu = recursive_model_cost(p), unitary_model_cost(p)
        rows.append({"r": r, "L": p.depth, "S": s, "n": n, "T_R": tr, "T_U": tu, "T": tr + tu})
    return rows


# --------------------------------------------------------------------------
# measured tree properties


def depth_radii(tree: Tree) -> dict[int, float]:
    out: dict[int, float] = {}
    for c in tree.clusters():
        out[c.depth] = max(out.get(c.depth, 0.0), c.radius)
    return out


def radii_scaling_report(tree: Tree, window: int | None = None) -> list[dict]:
    """Per-depth maximum radius.

    A depth is flagged when its maximum radius exceeds ``sqrt(2)/2`` times
    the maximum ``window`` levels above it (``window`` defaults to the
    rounded dataset LFD, at least 1).
    """
    radii = depth_radii(tree)
    if window is None:
        window = max(1, round(dataset_lfd(tree)))
    rows = []
    for depth in sorted(radii):
        above = radii.get(depth - window)
        flagged = above is not None and radii[depth] > SHRINK * above
        rows.append({"depth": depth, "max_radius": radii[depth], "flagged": flagged})
    return rows


def dataset_lfd(tree: Tree, min_cardinality: int = 32) -> float:
    """Median LFD over clusters with at least ``min_cardinality`` members.

    Each cluster contributes the LFD at its center with scales ``radius``
    and ``radius / 2``, counting ball members over the whole dataset (the
    stored per-cluster value counts only the cluster's own members, which
    reads low for lopsided clusters).
    """
    everyone = np.arange(len(tree), dtype=np.int64)
    vals = []
    for c in tree.clusters():
        if c.cardinality >= min_cardinality and c.radius > 0:
            d = tree.points.distances(c.center, everyone)
            vals.append(local_fractal_dimension(d, c.radius))
    return float(np.median(vals)) if vals else 0.0


def check_radii(tree: Tree) -> list[int]:
    """Offsets of clusters whose radius fails to cover every member."""
    bad = []
    for c in tree.clusters():
        d = tree.points.distances(c.center, tree.members(c))
        if d.size and d.max() > c.radius:
            bad.append(c.offset)
    return bad


def child_radius_growth(tree: Tree) -> list[tuple[int, float, float]]:
    """Clusters with a child larger than themselves: (depth, parent, child)."""
    out = []
    for c in tree.clusters():
        for child in c.children:
            if child.radius > c.radius:
                out.append((c.depth, c.radius, child.radius))
    return out


def to_csv(rows: list[dict], path=None) -> str:
    """Render rows as CSV; also write to ``path`` if given."""
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
