"""Graph-based encoders: Markov transitions, centralities, homophily, API
clusters, and rooted-subgraph batches."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import KIND_DENSE, KIND_GRAPH_BATCH, EncodedDataset, SubgraphInstance
from ..embeddings import Clustering, cluster_embeddings, train_skipgram
from ..features import EXTERNAL_API, FeatureRecord, SensitiveApiCatalog
from ..graphs import (
    FamilyAbstraction,
    community_homophily,
    count_sensitive_triads,
    degree_centrality,
    dfs_api_sequences,
    family_transition,
    harmonic_centrality,
    katz_centrality,
    khop_subgraph,
)
from .base import Encoder, labels_of, row_ids_of

CENTRALITY_FLAGS = ("degree", "harmonic", "katz")


class MamaDroidEncoder(Encoder):
    """Flattened family-transition matrix (row-major over the family order)."""

    approach = "mamadroid"
    output_kind = KIND_DENSE

    def __init__(self, abstraction: FamilyAbstraction | None = None):
        super().__init__()
        self.abstraction = abstraction or FamilyAbstraction()

    def _fit(self, records):
        pass  # the family list is fixed configuration, not fitted state

    def transform_record(self, record: FeatureRecord) -> np.ndarray:
        self._require_fitted()
        return family_transition(record.graph, self.abstraction).flatten()

    def transform(self, records):
        self._require_fitted()
        f = len(self.abstraction.families)
        mat = np.zeros((len(records), f * f), dtype=np.float64)
        for row, r in enumerate(records):
            mat[row] = family_transition(r.graph, self.abstraction).flatten()
        return EncodedDataset(
            kind=self.output_kind,
            payload=mat,
            row_ids=row_ids_of(records),
            labels=labels_of(records),
            meta={"families": self.abstraction.families},
        )

    def describe(self) -> str:
        f = len(self.abstraction.families)
        return f"family-transitions dim={f}x{f}"


def malscan_vector(
    record: FeatureRecord, catalog: SensitiveApiCatalog, centrality: str = "degree"
) -> np.ndarray:
    """Per-catalog-entry centrality of the matching graph node (0 when absent)."""
    if centrality not in CENTRALITY_FLAGS:
        raise ValueError(f"unknown centrality {centrality!r}")
    graph = record.graph
    if centrality == "degree":
        values = degree_centrality(graph)
    elif centrality == "harmonic":
        values = harmonic_centrality(graph)
    else:
        values = katz_centrality(graph)
    by_api: dict[str, float] = {}
    for node in graph.nodes:
        if node.kind == EXTERNAL_API and node.api_name:
            by_api[node.api_name] = values.get(node.node_id, 0.0)
    vec = np.zeros(len(catalog), dtype=np.float64)
    for i, name in enumerate(catalog.names):
        vec[i] = by_api.get(name, 0.0)
    return vec


class MalScanEncoder(Encoder):
    approach = "malscan"
    output_kind = KIND_DENSE

    def __init__(self, catalog: SensitiveApiCatalog, centrality: str = "degree"):
        super().__init__()
        if centrality not in CENTRALITY_FLAGS:
            raise ValueError(f"unknown centrality {centrality!r}")
        self.catalog = catalog
        self.centrality = centrality

    def _fit(self, records):
        pass  # the catalog fixes the feature order

    def transform_record(self, record: FeatureRecord) -> np.ndarray:
        self._require_fitted()
        return malscan_vector(record, self.catalog, self.centrality)

    def transform(self, records):
        self._require_fitted()
        mat = np.zeros((len(records), len(self.catalog)), dtype=np.float64)
        for row, r in enumerate(records):
            mat[row] = malscan_vector(r, self.catalog, self.centrality)
        return EncodedDataset(
            kind=self.output_kind,
            payload=mat,
            row_ids=row_ids_of(records),
            labels=labels_of(records),
            meta={"centrality": self.centrality},
        )

    def describe(self) -> str:
        return f"sensitive-{self.centrality}-centrality dim={len(self.catalog)}"


def homdroid_vector(record: FeatureRecord, catalog: SensitiveApiCatalog) -> np.ndarray:
    """Catalog presence bits within the suspicious community ++ (closed, open) triads."""
    communities, _homophily, suspicious = community_homophily(record.graph)
    vec = np.zeros(len(catalog) + 2, dtype=np.float64)
    if suspicious is None:
        return vec  # sentinel: no sensitive node anywhere
    members = set(communities[suspicious])
    index = catalog.index()
    for node in record.graph.nodes:
        if node.node_id in members and node.kind == EXTERNAL_API and node.api_name in index:
            vec[index[node.api_name]] = 1.0
    sub, _ = _induced_subgraph(record, members)
    closed, opened = count_sensitive_triads(sub)
    vec[len(catalog)] = float(closed)
    vec[len(catalog) + 1] = float(opened)
    return vec


def _induced_subgraph(record: FeatureRecord, members: set[int]):
    from ..features import GraphNode, ProgramGraph

    keep = sorted(members)
    remap = {old: new for new, old in enumerate(keep)}
    by_id = record.graph.node_by_id()
    nodes = tuple(
        GraphNode(remap[old], by_id[old].kind, by_id[old].api_name, by_id[old].sensitive)
        for old in keep
    )
    edges = tuple(
        (remap[s], remap[d]) for s, d in record.graph.edges if s in remap and d in remap
    )
    return ProgramGraph(nodes=nodes, edges=edges), keep


class HomDroidEncoder(Encoder):
    approach = "homdroid"
    output_kind = KIND_DENSE

    def __init__(self, catalog: SensitiveApiCatalog):
        super().__init__()
        self.catalog = catalog

    def _fit(self, records):
        pass

    def transform_record(self, record: FeatureRecord) -> np.ndarray:
        self._require_fitted()
        return homdroid_vector(record, self.catalog)

    def transform(self, records):
        self._require_fitted()
        mat = np.zeros((len(records), len(self.catalog) + 2), dtype=np.float64)
        for row, r in enumerate(records):
            mat[row] = homdroid_vector(r, self.catalog)
        return EncodedDataset(
            kind=self.output_kind,
            payload=mat,
            row_ids=row_ids_of(records),
            labels=labels_of(records),
            meta={},
        )

    def describe(self) -> str:
        return f"homdroid presence+triads dim={len(self.catalog) + 2}"


class SdacEncoder(Encoder):
    """API-cluster histograms: skip-gram over DFS walks, then k-means anchors."""

    approach = "sdac"
    output_kind = KIND_DENSE

    def __init__(
        self,
        embedding_dim: int = 10,
        k_max: int = 1000,
        walk_len: int = 64,
        max_paths: int = 16,
        epochs: int = 5,
        seed: int = 0,
    ):
        super().__init__()
        self.embedding_dim = embedding_dim
        self.k_max = k_max
        self.walk_len = walk_len
        self.max_paths = max_paths
        self.epochs = epochs
        self.seed = seed

    def _fit(self, records):
        sequences: list[list[str]] = []
        for r in records:
            for seq in dfs_api_sequences(
                r.graph, max_len=self.walk_len, max_paths=self.max_paths, seed=self.seed
            ):
                if seq:
                    sequences.append(seq)
        if not sequences:
            raise ValueError("no API sequences in training records")
        self.table = train_skipgram(
            sequences, dim=self.embedding_dim, epochs=self.epochs, seed=self.seed
        )
        k = min(self.k_max, max(1, len(self.table.vocabulary) // 2))
        self.clustering: Clustering = cluster_embeddings(self.table, k=k, seed=self.seed)

    def transform_record(self, record: FeatureRecord) -> np.ndarray:
        self._require_fitted()
        k = self.clustering.k
        vec = np.zeros(k, dtype=np.float64)
        for api, count in record.code.api_calls.items():
            cid = self.clustering.assignment.get(api)
            if cid is not None:
                vec[cid] += float(count)
        total = vec.sum()
        return vec / total if total > 0 else vec

    def transform(self, records):
        self._require_fitted()
        mat = np.zeros((len(records), self.clustering.k), dtype=np.float64)
        for row, r in enumerate(records):
            mat[row] = self.transform_record(r)
        return EncodedDataset(
            kind=self.output_kind,
            payload=mat,
            row_ids=row_ids_of(records),
            labels=labels_of(records),
            meta={"k": self.clustering.k},
        )

    def describe(self) -> str:
        return f"api-cluster-histogram k={self.clustering.k}"


@dataclass(frozen=True)
class ApiPermissionMap:
    """Optional api -> permissions association used for MSDroid node attributes."""

    permissions: tuple[str, ...] = ()
    mapping: dict = field(default_factory=dict)  # api_name -> tuple of permissions

    def bits(self, api_name: str | None) -> np.ndarray:
        vec = np.zeros(len(self.permissions), dtype=np.float64)
        if api_name and api_name in self.mapping:
            index = {p: i for i, p in enumerate(self.permissions)}
            for p in self.mapping[api_name]:
                i = index.get(p)
                if i is not None:
                    vec[i] = 1.0
        return vec


class MsDroidEncoder(Encoder):
    """One attributed k-hop subgraph per sensitive node.

    Node attributes: one-hot family || sensitive bit || permission-association
    bits (zero-width when no map is configured).
    """

    approach = "msdroid"
    output_kind = KIND_GRAPH_BATCH

    def __init__(
        self,
        catalog: SensitiveApiCatalog,
        k_hops: int = 2,
        abstraction: FamilyAbstraction | None = None,
        perm_map: ApiPermissionMap | None = None,
    ):
        super().__init__()
        self.catalog = catalog
        self.k_hops = k_hops
        self.abstraction = abstraction or FamilyAbstraction()
        self.perm_map = perm_map or ApiPermissionMap()

    @property
    def feature_dim(self) -> int:
        return len(self.abstraction.families) + 1 + len(self.perm_map.permissions)

    def _fit(self, records):
        pass

    def _node_attrs(self, graph) -> np.ndarray:
        fam_index = self.abstraction.index()
        d = self.feature_dim
        attrs = np.zeros((graph.n_nodes(), d), dtype=np.float64)
        for i, node in enumerate(sorted(graph.nodes, key=lambda n: n.node_id)):
            fam = self.abstraction.node_family(node)
            attrs[i, fam_index[fam]] = 1.0
            if node.sensitive:
                attrs[i, len(fam_index)] = 1.0
            if len(self.perm_map.permissions):
                attrs[i, len(fam_index) + 1 :] = self.perm_map.bits(node.api_name)
        return attrs

    def transform_record(self, record: FeatureRecord) -> list[SubgraphInstance]:
        self._require_fitted()
        out = []
        for node in record.graph.nodes:
            if not node.sensitive:
                continue
            sub, _ = khop_subgraph(record.graph, node.node_id, self.k_hops)
            out.append(
                SubgraphInstance(
                    node_features=self._node_attrs(sub),
                    edges=np.array(sub.edges, dtype=np.int64).reshape(-1, 2),
                )
            )
        return out

    def transform(self, records):
        self._require_fitted()
        payload = [self.transform_record(r) for r in records]
        return EncodedDataset(
            kind=self.output_kind,
            payload=payload,
            row_ids=row_ids_of(records),
            labels=labels_of(records),
            meta={"feature_dim": self.feature_dim, "k_hops": self.k_hops},
        )

    def describe(self) -> str:
        return f"rooted-subgraphs k={self.k_hops} attr_dim={self.feature_dim}"
