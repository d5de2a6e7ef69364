"""Command-line entry point: build, search, stats and bench."""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict

from .bench import load_config, run_bench
from .compressor import compress
from .data_io import FORMATS, load_dataset
from .errors import DataError, IntegrityError, InvalidInputError, UnsupportedMetricError
from .metrics import get_metric
from .search import ALGORITHMS, CompressedView, linear_scan
from .store import read_index, write_index
from .tree import PartitionCriteria, build_tree

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTEGRITY = 0, 2, 3, 4
BUILD_METRICS = ("hamming", "levenshtein", "jaccard", "dice")


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pancakes", description="Compressed exact similarity search.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build and compress an index")
    b.add_argument("--input", required=True)
    b.add_argument("--format", required=True, choices=FORMATS)
    b.add_argument("--metric", required=True, choices=BUILD_METRICS)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--output", required=True)
    b.add_argument("--min-cardinality", type=int, default=1)
    b.add_argument("--max-depth", type=int)
    b.add_argument("--min-radius", type=float)
    b.add_argument("--query-metric", choices=("hamming", "levenshtein"), default="levenshtein",
                   help="for fasta-msa: compare queries gap-stripped under Levenshtein (default) "
                        "or aligned under Hamming")

    s = sub.add_parser("search", help="query an index")
    s.add_argument("--index", required=True)
    s.add_argument("--queries", required=True)
    s.add_argument("--mode", required=True, choices=tuple(ALGORITHMS))
    group = s.add_mutually_exclusive_group(required=True)
    group.add_argument("--radius", type=float)
    group.add_argument("-k", type=int)
    s.add_argument("--output", required=True)
    s.add_argument("--sidecar", help="JSON-lines instrumentation (default: OUTPUT.jsonl)")
    s.add_argument("--linear-scan", action="store_true",
                   help="decode everything and scan instead of using the tree")
    s.add_argument("--debug", action="store_true", help="check every prune by decoding the cluster")

    st = sub.add_parser("stats", help="print index statistics")
    st.add_argument("--index", required=True)

    be = sub.add_parser("bench", help="run a benchmark config")
    be.add_argument("--config", required=True)
    be.add_argument("--output", help="write the JSON report here as well")
    return p


def cmd_build(args) -> int:
    ds = load_dataset(args.input, args.format)
    metric = get_metric(args.metric)
    aux = None
    if args.format == "fasta-msa":
        if metric.name != "hamming":
            raise UsageError("fasta-msa indexes are built under hamming")
        if args.query_metric == "levenshtein":
            aux = get_metric("levenshtein-gapless")
    elif args.format == "sets" and metric.kind != "set":
        raise UsageError(f"{metric.name} does not apply to set data")
    elif args.format == "fasta" and metric.kind == "set":
        raise UsageError(f"{metric.name} does not apply to sequence data")
    criteria = PartitionCriteria(args.min_cardinality, args.max_depth, args.min_radius)
    t0 = time.perf_counter()
    tree = build_tree(ds.points, metric, criteria, seed=args.seed, ids=ds.ids, aux_metric=aux)
    plan = compress(tree)
    size = write_index(plan, args.output)
    stats = read_index(args.output).stats()
    print(f"points      {stats.points}")
    print(f"data bytes  {stats.data_bytes}")
    print(f"tree bytes  {stats.tree_bytes}")
    print(f"total bytes {size}")
    print(f"seconds     {time.perf_counter() - t0:.3f}")
    return EXIT_OK


def _read_queries(path, index):
    kind = index.query_metric.kind
    return load_dataset(path, "sets" if kind == "set" else "fasta").points


def cmd_search(args) -> int:
    index = read_index(args.index)
    queries = _read_queries(args.queries, index)
    k = args.k
    if k is not None:
        if k < 1:
            raise UsageError("k must be >= 1")
        if k > index.n_points:
            print(f"warning: k={k} exceeds the {index.n_points} indexed points; using k={index.n_points}",
                  file=sys.stderr)
            k = index.n_points
    if args.radius is not None and args.mode != "rnn":
        raise UsageError(f"--radius applies to rnn; {args.mode} needs -k")
    if k is not None and args.mode == "rnn":
        raise UsageError("rnn needs --radius")
    fn = ALGORITHMS[args.mode]
    sidecar = args.sidecar or args.output + ".jsonl"
    with open(args.output, "w") as out, open(sidecar, "w") as side:
        for qid, q in enumerate(queries):
            view = CompressedView(index)
            t0 = time.perf_counter()
            if args.linear_scan:
                res = linear_scan(view, q, radius=args.radius, k=k)
            elif args.mode == "rnn":
                res = fn(view, q, args.radius, debug=args.debug)
            elif args.mode == "knn-repeated":
                res = fn(view, q, k)
            else:
                res = fn(view, q, k, debug=args.debug)
            seconds = time.perf_counter() - t0
            for rank, (hit, dist) in enumerate(res.hits, 1):
                out.write(f"{qid}\t{rank}\t{hit}\t{dist}\n")
            side.write(json.dumps({
                "query_id": qid, "seconds": seconds, "hits": len(res),
                "distance_computations": res.distance_computations,
                "clusters_visited": res.clusters_visited,
                "points_decompressed": res.points_decompressed,
                "decompressed_fraction": res.decompressed_fraction,
            }) + "\n")
    return EXIT_OK


def cmd_stats(args) -> int:
    index = read_index(args.index)
    stats = asdict(index.stats())
    stats["depth"] = int(index.nodes["depth"].max()) if index.n_nodes else 0
    stats["criteria"] = dict(zip(("min_cardinality", "max_depth", "min_radius"), index.criteria))
    print(json.dumps(stats, indent=2))
    return EXIT_OK


def cmd_bench(args) -> int:
    report = run_bench(load_config(args.config))
    text = json.dumps(report, indent=2, default=str)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def _origin(exc: BaseException) -> str:
    """Module name of the frame that raised ``exc``."""
    tb = exc.__traceback__
    while tb is not None and tb.tb_next is not None:
        tb = tb.tb_next
    return tb.tb_frame.f_globals.get("__name__", "?") if tb is not None else "?"


COMMANDS = {"build": cmd_build, "search": cmd_search, "stats": cmd_stats, "bench": cmd_bench}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except IntegrityError as exc:
        print(f"integrity error [{_origin(exc)}]: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (UsageError, UnsupportedMetricError) as exc:
        print(f"error [{_origin(exc)}]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, InvalidInputError, FileNotFoundError, UnicodeDecodeError) as exc:
        print(f"data error [{_origin(exc)}]: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
