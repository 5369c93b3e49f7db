"""Program-graph algorithms shared by the graph-based encoders.

Centralities are computed on the undirected projection of the call graph
(self-loops dropped, parallel edges collapsed); transition matrices and DFS
walks use the directed edges.
"""

from __future__ import annotations

import random
from collections import Counter, deque
from dataclasses import dataclass

import numpy as np

from .features import EXTERNAL_API, FeatureRecord, GraphNode, ProgramGraph

DEFAULT_FAMILIES = (
    "android",
    "java",
    "javax",
    "google",
    "apache",
    "json",
    "dom",
    "sax",
    "xml",
    "junit",
    "self-defined",
    "obfuscated",
)

# Longest prefix wins; checked in this order.
_FAMILY_PREFIXES = (
    ("org.w3c.dom", "dom"),
    ("org.xml.sax", "sax"),
    ("org.apache", "apache"),
    ("org.json", "json"),
    ("org.junit", "junit"),
    ("com.google", "google"),
    ("org.xml", "xml"),
    ("android", "android"),
    ("javax", "javax"),
    ("java", "java"),
    ("google", "google"),
    ("apache", "apache"),
    ("junit", "junit"),
    ("json", "json"),
    ("xml", "xml"),
    ("dom", "dom"),
    ("sax", "sax"),
)


@dataclass(frozen=True)
class FamilyAbstraction:
    """Total mapping api_name -> package family (MamaDroid-style family mode)."""

    families: tuple[str, ...] = DEFAULT_FAMILIES

    def classify(self, api_name: str | None) -> str:
        if not api_name:
            return "self-defined"
        for prefix, family in _FAMILY_PREFIXES:
            if api_name == prefix or api_name.startswith(prefix + "."):
                if family in self.families:
                    return family
        # Garbled/minified names: any single-character package segment
        # (class and method segments excluded).
        segments = api_name.split(".")
        packages = segments[:-2] if len(segments) >= 3 else segments[:-1]
        if any(len(seg) == 1 for seg in packages):
            return "obfuscated"
        return "self-defined"

    def node_family(self, node: GraphNode) -> str:
        if node.kind == EXTERNAL_API:
            return self.classify(node.api_name)
        return "self-defined"

    def index(self) -> dict[str, int]:
        return {f: i for i, f in enumerate(self.families)}


@dataclass(frozen=True)
class TransitionMatrix:
    families: tuple[str, ...]
    matrix: np.ndarray  # |F| x |F|, rows stochastic or all-zero

    def flatten(self) -> np.ndarray:
        return self.matrix.reshape(-1)


# ---------------------------------------------------------------------------
# Undirected projection helpers


def undirected_adjacency(graph: ProgramGraph) -> dict[int, set[int]]:
    """Neighbor sets on the undirected projection; self-loops dropped."""
    adj: dict[int, set[int]] = {n.node_id: set() for n in graph.nodes}
    for src, dst in graph.edges:
        if src == dst:
            continue
        adj[src].add(dst)
        adj[dst].add(src)
    return adj


def _bfs_distances(adj: dict[int, set[int]], source: int) -> dict[int, int]:
    dist = {source: 0}
    frontier = deque([source])
    while frontier:
        u = frontier.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                frontier.append(v)
    return dist


# ---------------------------------------------------------------------------
# Centralities


def degree_centrality(graph: ProgramGraph) -> dict[int, float]:
    """Undirected degree / (n - 1); single-node graphs yield 0."""
    adj = undirected_adjacency(graph)
    n = len(adj)
    if n <= 1:
        return {u: 0.0 for u in adj}
    return {u: len(neigh) / (n - 1) for u, neigh in adj.items()}


def harmonic_centrality(graph: ProgramGraph) -> dict[int, float]:
    """Sum of 1/d(u, v) over reachable v != u, normalized by (n - 1)."""
    adj = undirected_adjacency(graph)
    n = len(adj)
    if n <= 1:
        return {u: 0.0 for u in adj}
    out = {}
    for u in adj:
        dist = _bfs_distances(adj, u)
        total = sum(1.0 / d for v, d in dist.items() if v != u)
        out[u] = total / (n - 1)
    return out


class KatzConvergenceError(RuntimeError):
    pass


def katz_centrality(
    graph: ProgramGraph,
    alpha: float = 0.1,
    max_iter: int = 1000,
    tol: float = 1e-10,
) -> dict[int, float]:
    """Fixed point of x = alpha * A x + 1 on the undirected projection, L2-normalized."""
    adj = undirected_adjacency(graph)
    ids = sorted(adj)
    n = len(ids)
    if n == 0:
        return {}
    pos = {u: i for i, u in enumerate(ids)}
    a = np.zeros((n, n))
    for u, neigh in adj.items():
        for v in neigh:
            a[pos[u], pos[v]] = 1.0
    x = np.ones(n)
    for _ in range(max_iter):
        x_new = alpha * a @ x + 1.0
        if np.max(np.abs(x_new - x)) < tol:
            x = x_new
            break
        x = x_new
    else:
        raise KatzConvergenceError(
            f"katz iteration did not converge in {max_iter} steps (alpha={alpha})"
        )
    norm = np.linalg.norm(x)
    if norm > 0:
        x = x / norm
    return {u: float(x[pos[u]]) for u in ids}


# ---------------------------------------------------------------------------
# Sensitive triads


def count_sensitive_triads(graph: ProgramGraph) -> tuple[int, int]:
    """(closed, open) connected 3-node subsets containing >= 1 sensitive node.

    Closed = triangles; open = 2-paths whose endpoints are not adjacent.
    Each node set is counted once on the undirected projection.
    """
    adj = undirected_adjacency(graph)
    sensitive = {n.node_id for n in graph.nodes if n.sensitive}
    closed = 0
    opened = 0
    ids = sorted(adj)
    for b in ids:
        neigh = sorted(adj[b])
        for i in range(len(neigh)):
            for j in range(i + 1, len(neigh)):
                a, c = neigh[i], neigh[j]
                trio_sensitive = bool({a, b, c} & sensitive)
                if c in adj[a]:
                    # triangle: count once, when b is the smallest member
                    if b < a and b < c and trio_sensitive:
                        closed += 1
                elif trio_sensitive:
                    # open 2-path centered at b: center is unique
                    opened += 1
    return closed, opened


# ---------------------------------------------------------------------------
# k-hop subgraphs


def khop_subgraph(
    graph: ProgramGraph, root: int, k: int
) -> tuple[ProgramGraph, list[int]]:
    """Induced subgraph on nodes within undirected distance <= k of *root*.

    Node ids are remapped densely (sorted by original id); the returned list
    maps new id -> original id.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    by_id = graph.node_by_id()
    if root not in by_id:
        raise KeyError(f"root {root} not in graph")
    adj = undirected_adjacency(graph)
    dist = {root: 0}
    frontier = deque([root])
    while frontier:
        u = frontier.popleft()
        if dist[u] == k:
            continue
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                frontier.append(v)
    keep = sorted(dist)
    remap = {old: new for new, old in enumerate(keep)}
    nodes = tuple(
        GraphNode(remap[old], by_id[old].kind, by_id[old].api_name, by_id[old].sensitive)
        for old in keep
    )
    edges = tuple(
        (remap[s], remap[d]) for s, d in graph.edges if s in remap and d in remap
    )
    return ProgramGraph(nodes=nodes, edges=edges), keep


# ---------------------------------------------------------------------------
# DFS API-call sequences


def dfs_api_sequences(
    graph: ProgramGraph,
    max_len: int = 64,
    max_paths: int = 32,
    seed: int = 0,
) -> list[list[str]]:
    """API-name token sequences along maximal DFS paths.

    Walks start from every zero-in-degree node (all nodes when none exists),
    emit ``api_name`` of external nodes in visit order, truncate at *max_len*
    tokens, and stop after *max_paths* sequences.  Branch order is shuffled by
    the seed, so output is deterministic per (graph, seed).
    """
    if max_len < 1 or max_paths < 1:
        raise ValueError("max_len and max_paths must be >= 1")
    by_id = graph.node_by_id()
    if not by_id:
        return []
    succ: dict[int, list[int]] = {u: [] for u in by_id}
    indeg = {u: 0 for u in by_id}
    for src, dst in graph.edges:
        succ[src].append(dst)
        indeg[dst] += 1
    rng = random.Random(seed)
    roots = sorted(u for u in by_id if indeg[u] == 0) or sorted(by_id)

    sequences: list[list[str]] = []

    def tokens_of(path: list[int]) -> list[str]:
        toks = []
        for u in path:
            node = by_id[u]
            if node.kind == EXTERNAL_API and node.api_name:
                toks.append(node.api_name)
                if len(toks) == max_len:
                    break
        return toks

    def walk(u: int, path: list[int], on_path: set[int]) -> None:
        if len(sequences) >= max_paths:
            return
        path.append(u)
        on_path.add(u)
        nxt = [v for v in sorted(set(succ[u])) if v not in on_path]
        if not nxt or len(path) >= max_len * 4:
            sequences.append(tokens_of(path))
        else:
            rng.shuffle(nxt)
            for v in nxt:
                if len(sequences) >= max_paths:
                    break
                walk(v, path, on_path)
        path.pop()
        on_path.discard(u)

    for r in roots:
        if len(sequences) >= max_paths:
            break
        walk(r, [], set())
    return sequences


# ---------------------------------------------------------------------------
# Family-abstracted Markov transitions


def family_transition(
    graph: ProgramGraph, abstraction: FamilyAbstraction | None = None
) -> TransitionMatrix:
    """Abstract each edge to (family(src), family(dst)) and row-normalize counts."""
    abstraction = abstraction or FamilyAbstraction()
    families = abstraction.families
    idx = abstraction.index()
    by_id = graph.node_by_id()
    counts = np.zeros((len(families), len(families)))
    for src, dst in graph.edges:
        fs = abstraction.node_family(by_id[src])
        fd = abstraction.node_family(by_id[dst])
        counts[idx[fs], idx[fd]] += 1.0
    rowsum = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        matrix = np.where(rowsum > 0, counts / rowsum, 0.0)
    return TransitionMatrix(families=families, matrix=matrix)


# ---------------------------------------------------------------------------
# Community homophily


def label_propagation(graph: ProgramGraph, max_iter: int = 100) -> dict[int, int]:
    """Deterministic label propagation on the undirected projection.

    Nodes adopt the most frequent neighbor label (ties -> smallest label),
    scanning in ascending node id; community ids are relabeled to the minimal
    member id.
    """
    adj = undirected_adjacency(graph)
    labels = {u: u for u in adj}
    for _ in range(max_iter):
        changed = False
        for u in sorted(adj):
            if not adj[u]:
                continue
            freq = Counter(labels[v] for v in adj[u])
            best = min(lbl for lbl, c in freq.items() if c == max(freq.values()))
            if best != labels[u]:
                labels[u] = best
                changed = True
        if not changed:
            break
    # canonical community id = smallest node id in the community
    groups: dict[int, list[int]] = {}
    for u, lbl in labels.items():
        groups.setdefault(lbl, []).append(u)
    canonical = {}
    for lbl, members in groups.items():
        rep = min(members)
        for u in members:
            canonical[u] = rep
    return canonical


def community_homophily(
    graph: ProgramGraph,
) -> tuple[dict[int, list[int]], dict[int, float], int | None]:
    """Communities, per-community edge homophily, and the suspicious community.

    Homophily of a community is the fraction of its internal edges whose
    endpoints agree on the sensitive flag (1.0 when it has no internal edges).
    The suspicious community is the lowest-homophily one containing at least
    one sensitive node (ties -> larger community, then smaller id); ``None``
    when no sensitive node exists.
    """
    membership = label_propagation(graph)
    communities: dict[int, list[int]] = {}
    for u, cid in membership.items():
        communities.setdefault(cid, []).append(u)
    for members in communities.values():
        members.sort()

    sensitive = {n.node_id for n in graph.nodes if n.sensitive}
    adj = undirected_adjacency(graph)
    internal: dict[int, list[tuple[int, int]]] = {cid: [] for cid in communities}
    for u in sorted(adj):
        for v in sorted(adj[u]):
            if u < v and membership[u] == membership[v]:
                internal[membership[u]].append((u, v))

    homophily = {}
    for cid, edges in internal.items():
        if not edges:
            homophily[cid] = 1.0
        else:
            agree = sum(1 for u, v in edges if (u in sensitive) == (v in sensitive))
            homophily[cid] = agree / len(edges)

    candidates = [
        cid for cid, members in communities.items() if any(u in sensitive for u in members)
    ]
    if not candidates:
        return communities, homophily, None
    suspicious = min(
        candidates, key=lambda cid: (homophily[cid], -len(communities[cid]), cid)
    )
    return communities, homophily, suspicious


def sensitive_nodes(record: FeatureRecord) -> list[GraphNode]:
    return [n for n in record.graph.nodes if n.sensitive]
