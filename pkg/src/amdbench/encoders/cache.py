"""On-disk container for encoded datasets.

Layout: magic, little-endian u32 header length, JSON header (kind, rows,
labels, meta, payload descriptor), then raw blocks: little-endian float32 for
matrices, LEB128 varints for token streams and graph structure.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..data import (
    KIND_DENSE,
    KIND_GRAPH_BATCH,
    KIND_KERNEL,
    KIND_ONEHOT_SEQ,
    KIND_TOKEN_SEQ,
    EncodedDataset,
    SubgraphInstance,
)

_MAGIC = b"AMDBENC1"


def _write_varint(out: bytearray, value: int) -> None:
    if value < 0:
        raise ValueError("varints are unsigned")
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


class _VarintReader:
    def __init__(self, buf: bytes, offset: int = 0):
        self.buf = buf
        self.offset = offset

    def read(self) -> int:
        shift = 0
        value = 0
        while True:
            byte = self.buf[self.offset]
            self.offset += 1
            value |= (byte & 0x7F) << shift
            if not byte & 0x80:
                return value
            shift += 7


def _f32_block(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def _read_f32(buf: bytes, offset: int, shape) -> tuple[np.ndarray, int]:
    count = int(np.prod(shape)) if shape else 0
    nbytes = count * 4
    arr = np.frombuffer(buf[offset : offset + nbytes], dtype="<f4").reshape(shape)
    return arr.astype(np.float64), offset + nbytes


def _jsonable_meta(meta: dict) -> dict:
    out = {}
    for k, v in meta.items():
        if isinstance(v, tuple):
            out[k] = list(v)
        elif isinstance(v, (np.bool_, np.integer, np.floating)):
            out[k] = v.item()
        elif isinstance(v, (str, int, float, bool, list)) or v is None:
            out[k] = v
        # non-JSON-able meta entries are dropped from the cache
    return out


def save_encoded(ds: EncodedDataset, path: str | Path) -> None:
    blocks: list[bytes] = []
    if ds.kind == KIND_DENSE and isinstance(ds.payload, tuple):
        descriptor = {"type": "f32-list", "shapes": [list(m.shape) for m in ds.payload]}
        blocks.extend(_f32_block(m) for m in ds.payload)
    elif ds.kind in (KIND_DENSE, KIND_KERNEL):
        descriptor = {"type": "f32", "shape": list(ds.payload.shape)}
        blocks.append(_f32_block(ds.payload))
    elif ds.kind in (KIND_TOKEN_SEQ, KIND_ONEHOT_SEQ):
        ids, lengths = ds.payload
        descriptor = {"type": "varint-seqs", "n": int(ids.shape[0]), "width": int(ids.shape[1])}
        stream = bytearray()
        for row, length in zip(ids, lengths):
            _write_varint(stream, int(length))
            for v in row[: int(length)]:
                _write_varint(stream, int(v))
        blocks.append(bytes(stream))
    elif ds.kind == KIND_GRAPH_BATCH:
        descriptor = {"type": "graphs"}
        stream = bytearray()
        feature_blocks = []
        _write_varint(stream, len(ds.payload))
        for subgraphs in ds.payload:
            _write_varint(stream, len(subgraphs))
            for sg in subgraphs:
                _write_varint(stream, sg.node_features.shape[0])
                _write_varint(stream, sg.node_features.shape[1])
                _write_varint(stream, len(sg.edges))
                for s, d in sg.edges:
                    _write_varint(stream, int(s))
                    _write_varint(stream, int(d))
                feature_blocks.append(_f32_block(sg.node_features))
        blocks.append(bytes(stream))
        blocks.extend(feature_blocks)
    else:  # pragma: no cover
        raise ValueError(ds.kind)

    header = {
        "format": 1,
        "kind": ds.kind,
        "row_ids": list(ds.row_ids),
        "labels": [int(v) for v in ds.labels],
        "meta": _jsonable_meta(ds.meta),
        "payload": descriptor,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(header_bytes).to_bytes(4, "little"))
        fh.write(header_bytes)
        for block in blocks:
            fh.write(block)


def load_encoded(path: str | Path) -> EncodedDataset:
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise ValueError("not an amdbench encoded-dataset file")
    header_len = int.from_bytes(raw[8:12], "little")
    header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    offset = 12 + header_len
    desc = header["payload"]
    kind = header["kind"]
    if desc["type"] == "f32":
        payload, offset = _read_f32(raw, offset, tuple(desc["shape"]))
    elif desc["type"] == "f32-list":
        mats = []
        for shape in desc["shapes"]:
            m, offset = _read_f32(raw, offset, tuple(shape))
            mats.append(m)
        payload = tuple(mats)
    elif desc["type"] == "varint-seqs":
        n, width = desc["n"], desc["width"]
        reader = _VarintReader(raw, offset)
        pad = header["meta"].get("vocab_size", 0) if kind == KIND_ONEHOT_SEQ else 0
        ids = np.full((n, width), pad, dtype=np.int64)
        lengths = np.zeros(n, dtype=np.int64)
        for row in range(n):
            length = reader.read()
            lengths[row] = length
            for t in range(length):
                ids[row, t] = reader.read()
        payload = (ids, lengths)
    elif desc["type"] == "graphs":
        reader = _VarintReader(raw, offset)
        shapes = []
        n_apps = reader.read()
        per_app: list[list[tuple[int, int, list]]] = []
        for _ in range(n_apps):
            n_sub = reader.read()
            app = []
            for _ in range(n_sub):
                n_nodes = reader.read()
                dim = reader.read()
                n_edges = reader.read()
                edges = [(reader.read(), reader.read()) for _ in range(n_edges)]
                app.append((n_nodes, dim, edges))
                shapes.append((n_nodes, dim))
            per_app.append(app)
        offset = reader.offset
        payload = []
        for app in per_app:
            subgraphs = []
            for n_nodes, dim, edges in app:
                feats, offset = _read_f32(raw, offset, (n_nodes, dim))
                subgraphs.append(
                    SubgraphInstance(
                        node_features=feats,
                        edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
                    )
                )
            payload.append(subgraphs)
    else:  # pragma: no cover
        raise ValueError(desc["type"])
    return EncodedDataset(
        kind=kind,
        payload=payload,
        row_ids=tuple(header["row_ids"]),
        labels=np.array(header["labels"], dtype=np.int64),
        meta=header["meta"],
    )


def cache_key(approach: str, corpus_hash: str, config_hash: str) -> str:
    digest = hashlib.sha256(f"{approach}|{corpus_hash}|{config_hash}".encode()).hexdigest()
    return f"{approach}-{digest[:16]}"


def corpus_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode()).hexdigest()
