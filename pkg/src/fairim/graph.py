"""Directed influence graphs and ground-truth community partitions.

Node ids are re-indexed to dense integers ``0..n-1`` at load time so the
sampling engines can use flat array indexing; the original ids are kept
for reporting.  Graphs and partitions are immutable once built and can be
shared freely between parallel workers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "GraphFormatError",
    "InfluenceGraph",
    "CommunityPartition",
    "ProbabilityModel",
    "load_edge_list",
    "load_communities",
    "prune",
    "assign_probabilities",
]


class GraphFormatError(ValueError):
    """Malformed edge-list / community-file input."""


def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from fh
    else:  # file object or any iterable of lines
        yield from source


class InfluenceGraph:
    """Immutable directed graph with per-edge activation probabilities.

    Edges are stored sorted by ``(source, target)``; an edge probability of
    NaN means "not yet assigned" (see :func:`assign_probabilities`).
    Forward and reverse CSR adjacency are built lazily and cached.
    """

    def __init__(self, n: int, src: np.ndarray, dst: np.ndarray,
                 prob: np.ndarray, orig_ids: np.ndarray):
        self.n = int(n)
        self.src = src
        self.dst = dst
        self.prob = prob
        self.orig_ids = orig_ids
        for a in (src, dst, prob, orig_ids):
            a.flags.writeable = False
        self._out_csr = None
        self._in_csr = None
        self._dense_of = None

    # -- construction -------------------------------------------------

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple], directed: bool = True,
                   orig_ids: np.ndarray | None = None) -> "InfluenceGraph":
        """Build a graph from ``(u, v)`` or ``(u, v, p)`` tuples over dense ids."""
        triples = []
        for e in edges:
            u, v = int(e[0]), int(e[1])
            p = float(e[2]) if len(e) > 2 else math.nan
            triples.append((u, v, p))
        if orig_ids is None:
            orig_ids = np.arange(n, dtype=np.int64)
        src, dst, prob = _canonical_edges(n, triples, directed)
        return cls(n, src, dst, prob, np.asarray(orig_ids, dtype=np.int64))

    # -- id mapping ----------------------------------------------------

    def dense_of(self, original_id: int) -> int:
        if self._dense_of is None:
            self._dense_of = {int(o): i for i, o in enumerate(self.orig_ids)}
        return self._dense_of[int(original_id)]

    def original_of(self, dense_id: int) -> int:
        return int(self.orig_ids[dense_id])

    # -- adjacency -----------------------------------------------------

    @property
    def m(self) -> int:
        return self.src.size

    @property
    def has_probabilities(self) -> bool:
        return self.m > 0 and not np.isnan(self.prob).any()

    def out_csr(self):
        """``(indptr, targets, probs, edge_ids)`` grouped by source node."""
        if self._out_csr is None:
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.add.at(indptr, self.src + 1, 1)
            np.cumsum(indptr, out=indptr)
            # edges are already sorted by (src, dst)
            self._out_csr = (indptr, self.dst, self.prob,
                             np.arange(self.m, dtype=np.int64))
        return self._out_csr

    def in_csr(self):
        """``(indptr, sources, probs, edge_ids)`` grouped by target node."""
        if self._in_csr is None:
            order = np.lexsort((self.src, self.dst))
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.add.at(indptr, self.dst + 1, 1)
            np.cumsum(indptr, out=indptr)
            self._in_csr = (indptr, self.src[order], self.prob[order], order)
        return self._in_csr

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n)

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.n)

    def with_probabilities(self, prob: np.ndarray) -> "InfluenceGraph":
        if prob.shape != self.prob.shape:
            raise ValueError("probability array shape mismatch")
        return InfluenceGraph(self.n, self.src, self.dst,
                              np.asarray(prob, dtype=np.float64), self.orig_ids)

    def __repr__(self) -> str:
        return f"InfluenceGraph(n={self.n}, m={self.m})"


def _canonical_edges(n: int, triples, directed: bool):
    """Drop self-loops, expand undirected edges, merge duplicates (max p),
    and sort by (src, dst)."""
    if not directed:
        triples = triples + [(v, u, p) for (u, v, p) in triples]
    loops = sum(1 for u, v, _ in triples if u == v)
    if loops:
        log.warning("discarding %d self-loop(s); they never affect diffusion", loops)
        triples = [t for t in triples if t[0] != t[1]]
    merged: dict[tuple[int, int], float] = {}
    dups = 0
    for u, v, p in triples:
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"edge ({u},{v}) outside node range [0,{n})")
        if (u, v) in merged:
            dups += 1
            old = merged[(u, v)]
            # NaN-aware max: a set probability wins over unset
            merged[(u, v)] = p if math.isnan(old) else (old if math.isnan(p) else max(old, p))
        else:
            merged[(u, v)] = p
    if dups:
        log.warning("merged %d duplicate edge(s), keeping maximum probability", dups)
    keys = sorted(merged)
    src = np.array([u for u, _ in keys], dtype=np.int64)
    dst = np.array([v for _, v in keys], dtype=np.int64)
    prob = np.array([merged[k] for k in keys], dtype=np.float64)
    return src, dst, prob


def load_edge_list(source, directed: bool = True) -> InfluenceGraph:
    """Parse whitespace-separated ``u v [p]`` lines into a graph.

    ``#``-prefixed lines are comments.  Node ids may be arbitrary integers;
    they are re-indexed densely (sorted order) with the original ids kept
    on the graph.  Undirected inputs produce both edge directions.
    """
    triples_orig = []
    seen_ids: set[int] = set()
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"line {lineno}: expected 'u v [p]', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: node ids must be integers: {line!r}") from None
        p = math.nan
        if len(parts) == 3:
            try:
                p = float(parts[2])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad probability {parts[2]!r}") from None
            if not (0.0 <= p <= 1.0):
                raise GraphFormatError(f"line {lineno}: probability {p} outside [0,1]")
        seen_ids.add(u)
        seen_ids.add(v)
        triples_orig.append((u, v, p))
    if not triples_orig:
        raise GraphFormatError("empty edge list")
    orig_ids = np.array(sorted(seen_ids), dtype=np.int64)
    dense = {o: i for i, o in enumerate(orig_ids.tolist())}
    triples = [(dense[u], dense[v], p) for u, v, p in triples_orig]
    n = orig_ids.size
    src, dst, prob = _canonical_edges(n, triples, directed)
    return InfluenceGraph(n, src, dst, prob, orig_ids)


class CommunityPartition:
    """Disjoint node -> community assignment.

    Before :func:`prune` the node ids are whatever the community file used
    (``aligned=False``); after prune they are the dense ids of the pruned
    graph (``aligned=True``) and ``sizes`` sums to the graph's node count.
    Community ids are dense ``0..C-1`` with the original labels retained.
    """

    def __init__(self, node_ids: np.ndarray, communities: np.ndarray,
                 labels: np.ndarray, aligned: bool = False):
        self.node_ids = np.asarray(node_ids, dtype=np.int64)
        self.communities = np.asarray(communities, dtype=np.int64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.aligned = aligned
        if self.node_ids.size != self.communities.size:
            raise ValueError("node/community arrays must be parallel")
        if np.unique(self.node_ids).size != self.node_ids.size:
            raise GraphFormatError("a node is assigned to more than one community")
        self.sizes = np.bincount(self.communities, minlength=self.labels.size)
        if self.labels.size == 0 or (self.sizes < 1).any():
            raise ValueError("every community must have at least one member")
        if aligned and not np.array_equal(self.node_ids, np.arange(self.node_ids.size)):
            raise ValueError("aligned partition must cover dense ids 0..n-1")
        for a in (self.node_ids, self.communities, self.labels, self.sizes):
            a.flags.writeable = False
        self._members: list[np.ndarray] | None = None

    @property
    def C(self) -> int:
        return self.labels.size

    @property
    def n(self) -> int:
        return self.node_ids.size

    def members(self, c: int) -> np.ndarray:
        """Dense node ids in community ``c`` (aligned partitions only)."""
        if not self.aligned:
            raise ValueError("partition is not aligned to a graph; run prune() first")
        if self._members is None:
            order = np.argsort(self.communities, kind="stable")
            bounds = np.searchsorted(self.communities[order], np.arange(self.C + 1))
            self._members = [order[bounds[c]:bounds[c + 1]] for c in range(self.C)]
        return self._members[c]

    def community_of(self, v: int) -> int:
        if not self.aligned:
            raise ValueError("partition is not aligned to a graph")
        return int(self.communities[v])

    @classmethod
    def from_assignment(cls, communities: Iterable[int]) -> "CommunityPartition":
        """Aligned partition from a dense per-node community-label list."""
        arr = np.asarray(list(communities), dtype=np.int64)
        labels = np.unique(arr)
        dense = np.searchsorted(labels, arr)
        return cls(np.arange(arr.size), dense, labels, aligned=True)

    def __repr__(self) -> str:
        return f"CommunityPartition(n={self.n}, C={self.C}, aligned={self.aligned})"


def load_communities(source) -> CommunityPartition:
    """Parse ``node community`` lines; node ids are original graph ids."""
    nodes: list[int] = []
    comms: list[int] = []
    seen: dict[int, int] = {}
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"line {lineno}: expected 'node community', got {line!r}")
        try:
            v, c = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: ids must be integers: {line!r}") from None
        if v in seen:
            raise GraphFormatError(
                f"line {lineno}: node {v} assigned twice (communities must be disjoint)")
        seen[v] = c
        nodes.append(v)
        comms.append(c)
    if not nodes:
        raise GraphFormatError("empty community file")
    order = np.argsort(np.array(nodes))
    node_ids = np.array(nodes, dtype=np.int64)[order]
    raw_comm = np.array(comms, dtype=np.int64)[order]
    labels = np.unique(raw_comm)
    communities = np.searchsorted(labels, raw_comm)
    return CommunityPartition(node_ids, communities, labels, aligned=False)


def prune(graph: InfluenceGraph, partition: CommunityPartition,
          min_community_size: int) -> tuple[InfluenceGraph, CommunityPartition]:
    """Drop small communities and community-less nodes; re-index densely.

    Communities of size ``<= min_community_size - 1`` are removed, together
    with their nodes and with any graph node that has no community
    assignment.  The graph is restricted to the induced subgraph on the
    retained nodes.  Idempotent for a fixed threshold.
    """
    if min_community_size < 1:
        raise ValueError("min_community_size must be >= 1")
    if partition.aligned:
        if partition.n != graph.n:
            raise ValueError("aligned partition does not match graph size")
        dense_nodes = partition.node_ids
    else:
        try:
            dense_nodes = np.array([graph.dense_of(v) for v in partition.node_ids.tolist()],
                                   dtype=np.int64)
        except KeyError as exc:
            raise GraphFormatError(f"community file references node {exc.args[0]} "
                                   "not present in the graph") from None
    keep_comm = partition.sizes >= min_community_size
    if not keep_comm.any():
        raise ValueError("pruning removed every community")
    node_kept = keep_comm[partition.communities]
    kept_dense = dense_nodes[node_kept]
    kept_comm_label = partition.labels[partition.communities[node_kept]]

    order = np.argsort(kept_dense)
    kept_dense = kept_dense[order]
    kept_comm_label = kept_comm_label[order]

    new_id = np.full(graph.n, -1, dtype=np.int64)
    new_id[kept_dense] = np.arange(kept_dense.size)
    emask = (new_id[graph.src] >= 0) & (new_id[graph.dst] >= 0)
    src = new_id[graph.src[emask]]
    dst = new_id[graph.dst[emask]]
    prob = graph.prob[emask].copy()
    order_e = np.lexsort((dst, src))
    new_graph = InfluenceGraph(kept_dense.size, src[order_e], dst[order_e],
                               prob[order_e], graph.orig_ids[kept_dense])

    labels = np.unique(kept_comm_label)
    communities = np.searchsorted(labels, kept_comm_label)
    new_partition = CommunityPartition(np.arange(kept_dense.size), communities,
                                       labels, aligned=True)
    return new_graph, new_partition


@dataclass(frozen=True)
class ProbabilityModel:
    """Edge-probability assignment rule: uniform(p) | weighted_cascade | from_file."""

    kind: str
    p: float | None = None

    @classmethod
    def uniform(cls, p: float) -> "ProbabilityModel":
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"uniform probability {p} outside [0,1]")
        return cls("uniform", p)

    @classmethod
    def weighted_cascade(cls) -> "ProbabilityModel":
        return cls("weighted_cascade")

    @classmethod
    def from_file(cls) -> "ProbabilityModel":
        return cls("from_file")

    @classmethod
    def parse(cls, spec: str) -> "ProbabilityModel":
        """Parse a CLI spec: ``uniform:P`` | ``wic`` | ``file``."""
        if spec.startswith("uniform"):
            _, _, val = spec.partition(":")
            if not val:
                raise ValueError("uniform model needs a probability, e.g. uniform:0.01")
            return cls.uniform(float(val))
        if spec in ("wic", "weighted_cascade"):
            return cls.weighted_cascade()
        if spec in ("file", "from_file"):
            return cls.from_file()
        raise ValueError(f"unknown probability model {spec!r}")


def assign_probabilities(graph: InfluenceGraph, model: ProbabilityModel) -> InfluenceGraph:
    """Return a graph with edge probabilities set according to ``model``.

    ``uniform`` sets every edge to ``model.p``; ``weighted_cascade`` sets
    ``p(u,v) = 1 / in_degree(v)``; ``from_file`` validates that every edge
    already carries a probability.
    """
    if model.kind == "uniform":
        return graph.with_probabilities(np.full(graph.m, model.p, dtype=np.float64))
    if model.kind == "weighted_cascade":
        d_in = graph.in_degree()
        # every edge's target has in-degree >= 1 by definition
        return graph.with_probabilities(1.0 / d_in[graph.dst])
    if model.kind == "from_file":
        missing = np.isnan(graph.prob)
        if missing.any():
            i = int(np.flatnonzero(missing)[0])
            raise ValueError(
                f"edge ({graph.original_of(int(graph.src[i]))},"
                f"{graph.original_of(int(graph.dst[i]))}) has no probability; "
                f"{int(missing.sum())} edge(s) unset in total")
        return graph
    raise ValueError(f"unknown model kind {model.kind!r}")
