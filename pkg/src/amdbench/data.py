"""Encoded-dataset containers shared by encoders and models."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

KIND_DENSE = "dense-matrix"
KIND_KERNEL = "kernel-matrix"
KIND_TOKEN_SEQ = "token-sequences"
KIND_ONEHOT_SEQ = "one-hot-sequence"
KIND_GRAPH_BATCH = "graph-batch"

KINDS = (KIND_DENSE, KIND_KERNEL, KIND_TOKEN_SEQ, KIND_ONEHOT_SEQ, KIND_GRAPH_BATCH)


@dataclass(frozen=True)
class SubgraphInstance:
    """One attributed subgraph: dense node features plus directed edges."""

    node_features: np.ndarray  # (n_nodes, d)
    edges: np.ndarray  # (n_edges, 2) int64

    @property
    def n_nodes(self) -> int:
        return self.node_features.shape[0]


@dataclass
class EncodedDataset:
    """Approach-specific encoded batch with row -> app_id mapping and labels.

    Payload by kind:
      dense-matrix     -- (n, d) array, or a tuple of same-n arrays (modalities)
      kernel-matrix    -- (n, m) kernel against the fitted training rows
      token-sequences  -- (ids (n, L) int32 with 0 = pad/OOV, lengths (n,))
      one-hot-sequence -- (ids (n, L) int32 with V = pad sentinel, lengths (n,))
      graph-batch      -- list of per-app lists of SubgraphInstance
    """

    kind: str
    payload: Any
    row_ids: tuple[str, ...]
    labels: np.ndarray  # (n,) 0/1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.row_ids) != len(self.labels):
            raise ValueError("row count != label count")
        if self.kind == KIND_KERNEL and self.meta.get("is_train"):
            k = self.payload
            if k.shape[0] != k.shape[1] or not np.allclose(k, k.T, atol=1e-8):
                raise ValueError("train kernel matrix must be square and symmetric")

    @property
    def n_rows(self) -> int:
        return len(self.row_ids)


def take_rows(ds: EncodedDataset, idx: Sequence[int]) -> EncodedDataset:
    """Row-subset view of a dataset (kernel rows keep all training columns)."""
    idx = list(idx)
    if ds.kind == KIND_DENSE:
        if isinstance(ds.payload, tuple):
            payload: Any = tuple(m[idx] for m in ds.payload)
        else:
            payload = ds.payload[idx]
    elif ds.kind == KIND_KERNEL:
        payload = ds.payload[idx]
    elif ds.kind in (KIND_TOKEN_SEQ, KIND_ONEHOT_SEQ):
        ids, lengths = ds.payload
        payload = (ids[idx], lengths[idx])
    elif ds.kind == KIND_GRAPH_BATCH:
        payload = [ds.payload[i] for i in idx]
    else:  # pragma: no cover
        raise ValueError(ds.kind)
    meta = dict(ds.meta)
    meta.pop("is_train", None)
    return EncodedDataset(
        kind=ds.kind,
        payload=payload,
        row_ids=tuple(ds.row_ids[i] for i in idx),
        labels=ds.labels[idx],
        meta=meta,
    )
