"""Closed-world binary/count vector encoders over category-prefixed vocabularies."""

from __future__ import annotations

from collections import Counter
from typing import Sequence

import numpy as np

from ..data import KIND_DENSE, EncodedDataset
from ..features import FeatureRecord
from .base import Encoder, labels_of, row_ids_of

# category -> set-valued extractor; vocabulary entries are "<category>::<value>"
CATEGORY_EXTRACTORS = {
    "hardware": lambda r: set(r.manifest.hardware),
    "component": lambda r: {f"{kind}:{name}" for kind, name in r.manifest.components},
    "intent": lambda r: set(r.manifest.intents),
    "permission": lambda r: set(r.manifest.permissions),
    "api_call": lambda r: set(r.code.api_calls),
    "code_string": lambda r: set(r.code.code_strings),
}

DREBIN_CATEGORIES = ("hardware", "component", "intent", "permission", "api_call", "code_string")
XMAL_CATEGORIES = ("api_call", "permission")
RAMDA_CATEGORIES = ("intent", "permission", "api_call")


def prefixed_features(record: FeatureRecord, categories: Sequence[str]) -> set[str]:
    out: set[str] = set()
    for cat in categories:
        out.update(f"{cat}::{v}" for v in CATEGORY_EXTRACTORS[cat](record))
    return out


class CategoryBinaryEncoder(Encoder):
    """Binary presence vector over the train-union vocabulary (lexicographic order).

    Unseen-at-transform features are dropped (closed-world vocabulary).
    """

    output_kind = KIND_DENSE

    def __init__(self, categories: Sequence[str], approach: str = "binary"):
        super().__init__()
        unknown = set(categories) - set(CATEGORY_EXTRACTORS)
        if unknown:
            raise ValueError(f"unknown categories {sorted(unknown)}")
        self.categories = tuple(categories)
        self.approach = approach

    def _fit(self, records):
        vocab: set[str] = set()
        for r in records:
            vocab.update(prefixed_features(r, self.categories))
        self.vocabulary = tuple(sorted(vocab))
        self.index = {f: i for i, f in enumerate(self.vocabulary)}

    def transform_record(self, record: FeatureRecord) -> np.ndarray:
        self._require_fitted()
        vec = np.zeros(len(self.vocabulary), dtype=np.float64)
        for f in prefixed_features(record, self.categories):
            i = self.index.get(f)
            if i is not None:
                vec[i] = 1.0
        return vec

    def transform(self, records):
        self._require_fitted()
        mat = np.zeros((len(records), len(self.vocabulary)), dtype=np.float64)
        for row, r in enumerate(records):
            for f in prefixed_features(r, self.categories):
                i = self.index.get(f)
                if i is not None:
                    mat[row, i] = 1.0
        return EncodedDataset(
            kind=self.output_kind,
            payload=mat,
            row_ids=row_ids_of(records),
            labels=labels_of(records),
            meta={"binary": True, "feature_names": self.vocabulary},
        )

    def describe(self) -> str:
        return f"binary[{'+'.join(self.categories)}] dim={len(self.vocabulary)}"


class MultimodalEncoder(Encoder):
    """Kim-style five-modality representation.

    Modalities: permissions (binary); hardware+components+intents (binary);
    API-call counts; opcode 2-gram counts (top-``max_ngrams`` by train
    frequency); code strings (binary).
    """

    approach = "kim"
    output_kind = KIND_DENSE

    def __init__(self, max_ngrams: int = 2048):
        super().__init__()
        self.max_ngrams = max_ngrams

    def _fit(self, records):
        perm: set[str] = set()
        manifest: set[str] = set()
        apis: set[str] = set()
        strings: set[str] = set()
        gram_counts: Counter = Counter()
        for r in records:
            perm.update(r.manifest.permissions)
            manifest.update(prefixed_features(r, ("hardware", "component", "intent")))
            apis.update(r.code.api_calls)
            strings.update(r.code.code_strings)
            seq = r.code.opcode_seq
            gram_counts.update(zip(seq, seq[1:]))
        top_grams = sorted(
            gram_counts, key=lambda g: (-gram_counts[g], g)
        )[: self.max_ngrams]
        self.vocabs = (
            tuple(sorted(perm)),
            tuple(sorted(manifest)),
            tuple(sorted(apis)),
            tuple(sorted(top_grams)),
            tuple(sorted(strings)),
        )
        self.indexes = [{f: i for i, f in enumerate(v)} for v in self.vocabs]

    def transform_record(self, record: FeatureRecord) -> tuple[np.ndarray, ...]:
        self._require_fitted()
        vecs = [np.zeros(len(v), dtype=np.float64) for v in self.vocabs]
        for p in record.manifest.permissions:
            i = self.indexes[0].get(p)
            if i is not None:
                vecs[0][i] = 1.0
        for f in prefixed_features(record, ("hardware", "component", "intent")):
            i = self.indexes[1].get(f)
            if i is not None:
                vecs[1][i] = 1.0
        for api, count in record.code.api_calls.items():
            i = self.indexes[2].get(api)
            if i is not None:
                vecs[2][i] = float(count)
        seq = record.code.opcode_seq
        for gram, count in Counter(zip(seq, seq[1:])).items():
            i = self.indexes[3].get(gram)
            if i is not None:
                vecs[3][i] = float(count)
        for s in record.code.code_strings:
            i = self.indexes[4].get(s)
            if i is not None:
                vecs[4][i] = 1.0
        return tuple(vecs)

    def transform(self, records):
        self._require_fitted()
        mats = [np.zeros((len(records), len(v)), dtype=np.float64) for v in self.vocabs]
        for row, r in enumerate(records):
            for m, vec in zip(mats, self.transform_record(r)):
                m[row] = vec
        return EncodedDataset(
            kind=self.output_kind,
            payload=tuple(mats),
            row_ids=row_ids_of(records),
            labels=labels_of(records),
            meta={"modalities": ("permission", "manifest", "api_count", "opcode_2gram", "code_string")},
        )

    def describe(self) -> str:
        return "multimodal dims=" + "x".join(str(len(v)) for v in self.vocabs)


class HinDroidKernelEncoder(Encoder):
    """App-similarity kernel counting shared APIs (boolean incidence, K = A A^T)."""

    approach = "hindroid"
    output_kind = "kernel-matrix"

    def __init__(self, normalize: bool = False):
        super().__init__()
        self.normalize = normalize

    def _fit(self, records):
        apis: set[str] = set()
        for r in records:
            apis.update(r.code.api_calls)
        self.api_index = {a: i for i, a in enumerate(sorted(apis))}
        self._a_train = self.incidence(records)
        self._train_ids = row_ids_of(records)

    def incidence(self, records) -> np.ndarray:
        mat = np.zeros((len(records), len(self.api_index)), dtype=np.float64)
        for row, r in enumerate(records):
            for api in r.code.api_calls:
                i = self.api_index.get(api)
                if i is not None:
                    mat[row, i] = 1.0
        return mat

    def transform(self, records):
        self._require_fitted()
        a = self.incidence(records)
        kernel = a @ self._a_train.T
        is_train = row_ids_of(records) == self._train_ids
        if self.normalize:
            norms = np.sqrt(np.maximum(np.sum(a * a, axis=1), 1e-12))
            train_norms = np.sqrt(np.maximum(np.sum(self._a_train * self._a_train, axis=1), 1e-12))
            kernel = kernel / norms[:, None] / train_norms[None, :]
        return EncodedDataset(
            kind=self.output_kind,
            payload=kernel,
            row_ids=row_ids_of(records),
            labels=labels_of(records),
            meta={"is_train": is_train, "n_train": len(self._train_ids)},
        )

    def describe(self) -> str:
        return f"kernel[AA^T] apis={len(self.api_index)}"
