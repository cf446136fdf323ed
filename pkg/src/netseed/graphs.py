"""Undirected network representation, synthetic generation, ingestion,
community binning, and structural statistics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .rng import RngTree

log = logging.getLogger(__name__)

__all__ = [
    "Graph",
    "BinPartition",
    "ParseError",
    "gen_sbm",
    "load_edge_list",
    "save_edge_list",
    "load_partition",
    "save_partition",
    "degree",
    "edge_betweenness",
    "modularity",
    "detect_communities",
]


class ParseError(ValueError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class Graph:
    """Simple undirected graph: no self-loops, no duplicate edges.

    Immutable after construction. Edges are stored as sorted (u, v) pairs
    with u < v; neighbor arrays are precomputed for fast traversal.
    """

    def __init__(self, n: int, edges, node_features: np.ndarray | None = None):
        if n < 0:
            raise ValueError("node count must be nonnegative")
        norm = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) has endpoint outside [0,{n})")
            norm.add((min(u, v), max(u, v)))
        self.n = int(n)
        self.edges: tuple[tuple[int, int], ...] = tuple(sorted(norm))
        if node_features is not None:
            node_features = np.asarray(node_features, dtype=float)
            if node_features.shape[0] != n:
                raise ValueError("node_features must have one row per node")
        self.node_features = node_features

        nbrs: list[list[int]] = [[] for _ in range(n)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        self._nbrs = tuple(np.array(sorted(a), dtype=np.int64) for a in nbrs)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def neighbors(self, node: int) -> np.ndarray:
        return self._nbrs[node]

    def degree(self, node: int) -> int:
        if not (0 <= node < self.n):
            raise ValueError(f"node {node} out of range [0,{self.n})")
        return len(self._nbrs[node])

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self._nbrs], dtype=np.int64)

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix (float64)."""
        a = np.zeros((self.n, self.n))
        for u, v in self.edges:
            a[u, v] = 1.0
            a[v, u] = 1.0
        return a

    def __repr__(self) -> str:  # pragma: no cover
        return f"Graph(n={self.n}, edges={self.edge_count})"


@dataclass
class BinPartition:
    """Assignment of every node to exactly one of K nonempty bins."""

    n: int
    bin_of: np.ndarray
    K: int = field(init=False)

    def __post_init__(self):
        self.bin_of = np.asarray(self.bin_of, dtype=np.int64)
        if self.bin_of.shape != (self.n,):
            raise ValueError("bin_of must assign exactly one bin per node")
        if self.n == 0:
            raise ValueError("partition of empty node set")
        k = int(self.bin_of.max()) + 1
        if self.bin_of.min() < 0:
            raise ValueError("negative bin index")
        sizes = np.bincount(self.bin_of, minlength=k)
        if (sizes == 0).any():
            raise ValueError("every bin must be nonempty")
        self.K = k

    def members(self, k: int) -> np.ndarray:
        return np.nonzero(self.bin_of == k)[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.bin_of, minlength=self.K)

    def indicator(self) -> np.ndarray:
        """n x K one-hot membership matrix (float64)."""
        s = np.zeros((self.n, self.K))
        s[np.arange(self.n), self.bin_of] = 1.0
        return s


def degree(graph: Graph, node: int) -> int:
    return graph.degree(node)


# ---------------------------------------------------------------------------
# Generation and ingestion
# ---------------------------------------------------------------------------

def gen_sbm(block_sizes, p_in: float, p_out: float, seed: int) -> tuple[Graph, BinPartition]:
    """Stochastic block model with homogeneous within/between edge rates.

    Nodes are numbered consecutively by block; the returned partition is the
    ground-truth block assignment. Deterministic given seed.
    """
    block_sizes = [int(b) for b in block_sizes]
    if len(block_sizes) == 0:
        raise ValueError("block_sizes must be nonempty")
    if any(b < 1 for b in block_sizes):
        raise ValueError("all block sizes must be >= 1")
    for name, p in (("p_in", p_in), ("p_out", p_out)):
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"{name}={p} outside [0,1]")

    rng = RngTree(seed).child("sbm").generator()
    offsets = np.cumsum([0] + block_sizes)
    n = int(offsets[-1])
    edges = []
    nb = len(block_sizes)
    for a in range(nb):
        for b in range(a, nb):
            p = p_in if a == b else p_out
            ia, ja = offsets[a], offsets[a + 1]
            ib, jb = offsets[b], offsets[b + 1]
            if a == b:
                size = block_sizes[a]
                draws = rng.random((size, size))
                iu, ju = np.triu_indices(size, k=1)
                hit = draws[iu, ju] < p
                for u, v in zip(iu[hit], ju[hit]):
                    edges.append((ia + int(u), ia + int(v)))
            else:
                draws = rng.random((block_sizes[a], block_sizes[b]))
                iu, ju = np.nonzero(draws < p)
                for u, v in zip(iu, ju):
                    edges.append((ia + int(u), ib + int(v)))

    bin_of = np.zeros(n, dtype=np.int64)
    for k in range(nb):
        bin_of[offsets[k] : offsets[k + 1]] = k
    return Graph(n, edges), BinPartition(n, bin_of)


def load_edge_list(source) -> Graph:
    """Read a UTF-8 ``src,dst`` edge list from a path or open stream.

    Node ids are made dense: an id set that is already exactly 0..n-1 is
    kept as is (so save/reload round-trips), anything else is compacted to
    0..n-1 in first-appearance order (src before dst, line by line).
    Duplicate and reversed edges are deduplicated; self-loops are dropped
    with a logged warning count. Lines starting with '#' and blank lines
    are ignored.
    """
    if hasattr(source, "read"):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        lines = text.splitlines()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()

    appearance: dict[int, int] = {}
    raw_pairs: list[tuple[int, int]] = []
    dropped = 0
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 'src,dst', got {raw!r}", line_no)
        try:
            src, dst = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer node id in {raw!r}", line_no) from None
        for node in (src, dst):
            if node not in appearance:
                appearance[node] = len(appearance)
        if src == dst:
            dropped += 1
            continue
        raw_pairs.append((src, dst))
    if dropped:
        log.warning("dropped %d self-loop(s) while loading edge list", dropped)

    n = len(appearance)
    if set(appearance) == set(range(n)):
        remap = {node: node for node in appearance}
    else:
        remap = appearance
    edges = set()
    for src, dst in raw_pairs:
        u, v = remap[src], remap[dst]
        edges.add((min(u, v), max(u, v)))
    return Graph(n, edges)


def save_edge_list(graph: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in graph.edges:
            fh.write(f"{u},{v}\n")


def load_partition(path, n: int | None = None) -> BinPartition:
    """Read ``node,bin`` lines into a BinPartition."""
    pairs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(f"expected 'node,bin', got {raw!r}", line_no)
            pairs[int(parts[0])] = int(parts[1])
    count = n if n is not None else (max(pairs) + 1 if pairs else 0)
    bin_of = np.full(count, -1, dtype=np.int64)
    for node, k in pairs.items():
        bin_of[node] = k
    if (bin_of < 0).any():
        raise ValueError("partition file does not cover all nodes")
    return BinPartition(count, bin_of)


def save_partition(partition: BinPartition, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node in range(partition.n):
            fh.write(f"{node},{int(partition.bin_of[node])}\n")


# ---------------------------------------------------------------------------
# Structural statistics
# ---------------------------------------------------------------------------

def edge_betweenness(graph: Graph, edges=None) -> dict[tuple[int, int], float]:
    """Shortest-path betweenness of each edge, undirected convention.

    Brandes accumulation over BFS trees from every source; the ordered-pair
    total is halved so each unordered node pair counts once. ``edges``
    restricts the graph to a working subset (used by Girvan-Newman).
    """
    if edges is None:
        edges = graph.edges
    n = graph.n
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    score = {(min(u, v), max(u, v)): 0.0 for u, v in edges}

    for s in range(n):
        # BFS from s with path counts
        dist = [-1] * n
        sigma = [0.0] * n
        preds: list[list[int]] = [[] for _ in range(n)]
        dist[s] = 0
        sigma[s] = 1.0
        order = [s]
        head = 0
        while head < len(order):
            v = order[head]
            head += 1
            for w in nbrs[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    order.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        # dependency accumulation in reverse BFS order
        delta = [0.0] * n
        for w in reversed(order):
            for v in preds[w]:
                c = sigma[v] / sigma[w] * (1.0 + delta[w])
                key = (min(v, w), max(v, w))
                score[key] += c
                delta[v] += c
    return {e: val / 2.0 for e, val in score.items()}


def modularity(graph: Graph, partition: BinPartition) -> float:
    """Newman modularity Q = sum_c [ e_c/m - (d_c/2m)^2 ]."""
    if partition.n != graph.n:
        raise ValueError("partition does not cover the graph")
    m = graph.edge_count
    if m == 0:
        raise ValueError("modularity undefined on a graph with no edges")
    within = np.zeros(partition.K)
    for u, v in graph.edges:
        if partition.bin_of[u] == partition.bin_of[v]:
            within[partition.bin_of[u]] += 1.0
    deg_tot = np.zeros(partition.K)
    degs = graph.degrees()
    for node in range(graph.n):
        deg_tot[partition.bin_of[node]] += degs[node]
    return float(np.sum(within / m - (deg_tot / (2.0 * m)) ** 2))


def _components(n: int, edges) -> np.ndarray:
    """Connected-component label per node (labels are arbitrary ints)."""
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    return np.array([find(x) for x in range(n)], dtype=np.int64)


def _relabel_by_size(n: int, labels: np.ndarray) -> np.ndarray:
    """Relabel groups 0..K-1 by descending size, ties by smallest member id."""
    groups: dict[int, list[int]] = {}
    for node in range(n):
        groups.setdefault(int(labels[node]), []).append(node)
    ordered = sorted(groups.values(), key=lambda mem: (-len(mem), mem[0]))
    out = np.zeros(n, dtype=np.int64)
    for new_k, mem in enumerate(ordered):
        for node in mem:
            out[node] = new_k
    return out


def detect_communities(graph: Graph, min_size: int = 1) -> BinPartition:
    """Girvan-Newman: remove max-betweenness edges, keep the best-modularity
    component partition, then absorb communities below ``min_size`` into the
    largest one. Bins are relabeled 0..K-1 by descending size.
    """
    if graph.n == 0:
        raise ValueError("cannot detect communities on an empty graph")
    if min_size < 1:
        raise ValueError("min_size must be >= 1")

    working = list(graph.edges)
    best_labels = _components(graph.n, working)
    if graph.edge_count == 0:
        labels = best_labels
    else:
        best_q = modularity(graph, BinPartition(graph.n, _dense(best_labels)))
        while working:
            bet = edge_betweenness(graph, working)
            target = max(bet.items(), key=lambda kv: (kv[1], (-kv[0][0], -kv[0][1])))[0]
            working.remove(target)
            labels_now = _components(graph.n, working)
            q = modularity(graph, BinPartition(graph.n, _dense(labels_now)))
            if q > best_q + 1e-12:
                best_q = q
                best_labels = labels_now
        labels = best_labels

    dense = _dense(labels)
    sizes = np.bincount(dense)
    if (sizes < min_size).any() and len(sizes) > 1:
        order = sorted(range(len(sizes)), key=lambda k: (-sizes[k], int(np.nonzero(dense == k)[0][0])))
        largest = order[0]
        for k in range(len(sizes)):
            if sizes[k] < min_size and k != largest:
                dense[dense == k] = largest
        dense = _dense(dense)
    return BinPartition(graph.n, _relabel_by_size(graph.n, dense))


def _dense(labels: np.ndarray) -> np.ndarray:
    """Map arbitrary labels to 0..K-1 preserving first-appearance order."""
    seen: dict[int, int] = {}
    out = np.zeros(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels):
        lab = int(lab)
        if lab not in seen:
            seen[lab] = len(seen)
        out[i] = seen[lab]
    return out
