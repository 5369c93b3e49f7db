"""Opcode-sequence encoders: one-hot image batches and padded token indices."""

from __future__ import annotations

import numpy as np

from ..data import KIND_ONEHOT_SEQ, KIND_TOKEN_SEQ, EncodedDataset
from ..features import FeatureRecord
from .base import Encoder, labels_of, row_ids_of


def opcode_image(record: FeatureRecord, vocab_size: int, maxlen: int) -> np.ndarray:
    """L x V one-hot matrix: row t fires at opcode_seq[t]; truncated/zero-padded."""
    seq = record.code.opcode_seq[:maxlen]
    mat = np.zeros((maxlen, vocab_size), dtype=np.float64)
    for t, op in enumerate(seq):
        if not 0 <= op < vocab_size:
            raise ValueError(f"opcode {op} out of range [0, {vocab_size})")
        mat[t, op] = 1.0
    return mat


class OpcodeImageEncoder(Encoder):
    """Batched one-hot opcode image; stored compactly as ids + lengths.

    The pad sentinel is ``vocab_size`` (an all-zero one-hot row).
    """

    approach = "mclaughlin"
    output_kind = KIND_ONEHOT_SEQ

    def __init__(self, vocab_size: int = 256, maxlen: int = 2048):
        super().__init__()
        self.vocab_size = vocab_size
        self.maxlen = maxlen

    def _fit(self, records):
        pass  # stateless besides configuration

    def transform(self, records):
        self._require_fitted()
        n = len(records)
        lengths = np.zeros(n, dtype=np.int64)
        width = self.maxlen
        ids = np.full((n, width), self.vocab_size, dtype=np.int64)
        for row, r in enumerate(records):
            seq = r.code.opcode_seq[: self.maxlen]
            if any(not 0 <= op < self.vocab_size for op in seq):
                raise ValueError("opcode id out of range")
            ids[row, : len(seq)] = seq
            lengths[row] = len(seq)
        return EncodedDataset(
            kind=self.output_kind,
            payload=(ids, lengths),
            row_ids=row_ids_of(records),
            labels=labels_of(records),
            meta={"vocab_size": self.vocab_size, "maxlen": self.maxlen},
        )

    def describe(self) -> str:
        return f"one-hot-sequence V={self.vocab_size} L={self.maxlen}"


class TokenSequenceEncoder(Encoder):
    """Opcode-id token sequences re-indexed over the train vocabulary.

    Index 0 is reserved for padding and out-of-vocabulary tokens.
    """

    approach = "deeprefiner"
    output_kind = KIND_TOKEN_SEQ

    def __init__(self, maxlen: int = 4096):
        super().__init__()
        self.maxlen = maxlen

    def _fit(self, records):
        seen: set[int] = set()
        for r in records:
            seen.update(r.code.opcode_seq)
        self.token_index = {tok: i + 1 for i, tok in enumerate(sorted(seen))}

    def transform_record(self, record: FeatureRecord) -> np.ndarray:
        self._require_fitted()
        out = np.zeros(self.maxlen, dtype=np.int64)
        for t, tok in enumerate(record.code.opcode_seq[: self.maxlen]):
            out[t] = self.token_index.get(tok, 0)
        return out

    def transform(self, records):
        self._require_fitted()
        n = len(records)
        ids = np.zeros((n, self.maxlen), dtype=np.int64)
        lengths = np.zeros(n, dtype=np.int64)
        for row, r in enumerate(records):
            seq = r.code.opcode_seq[: self.maxlen]
            for t, tok in enumerate(seq):
                ids[row, t] = self.token_index.get(tok, 0)
            lengths[row] = len(seq)
        return EncodedDataset(
            kind=self.output_kind,
            payload=(ids, lengths),
            row_ids=row_ids_of(records),
            labels=labels_of(records),
            meta={"vocab_size": len(self.token_index) + 1, "maxlen": self.maxlen},
        )

    def describe(self) -> str:
        return f"token-sequences vocab={len(self.token_index) + 1} L={self.maxlen}"
