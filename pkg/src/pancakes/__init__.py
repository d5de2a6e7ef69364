"""Compressed exact similarity search over cluster trees."""

from .compressor import CompressionPlan, compress
from .errors import DataError, IntegrityError, InvalidInputError, PancakesError, UnsupportedMetricError
from .metrics import get_metric
from .search import (
    HitSet,
    knn_breadth_first,
    knn_depth_first,
    knn_repeated_rnn,
    linear_scan,
    rnn_search,
)
from .store import CompressedIndex, decompress_cluster, read_index, write_index
from .tree import Cluster, PartitionCriteria, Tree, build_tree

__version__ = "0.1.0"

__all__ = [
    "Cluster",
    "CompressedIndex",
    "CompressionPlan",
    "DataError",
    "HitSet",
    "IntegrityError",
    "InvalidInputError",
    "PancakesError",
    "PartitionCriteria",
    "Tree",
    "UnsupportedMetricError",
    "build_tree",
    "compress",
    "decompress_cluster",
    "get_metric",
    "knn_breadth_first",
    "knn_depth_first",
    "knn_repeated_rnn",
    "linear_scan",
    "read_index",
    "rnn_search",
    "write_index",
]
