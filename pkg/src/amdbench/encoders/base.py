"""Encoder contract: fit on training records, transform any records."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..data import EncodedDataset
from ..features import FeatureRecord, Label


class NotFittedError(RuntimeError):
    pass


def labels_of(records: Sequence[FeatureRecord]) -> np.ndarray:
    return np.array([1 if r.label == Label.MALICIOUS else 0 for r in records], dtype=np.int64)


def row_ids_of(records: Sequence[FeatureRecord]) -> tuple[str, ...]:
    return tuple(r.app_id for r in records)


class Encoder:
    """Fit-once / transform-any feature representation.

    Subclasses set ``approach`` and ``output_kind``, implement ``_fit`` and
    ``transform``, and must not mutate input records.
    """

    approach: str = ""
    output_kind: str = ""

    def __init__(self):
        self._fitted = False

    def fit(self, records: Sequence[FeatureRecord]) -> "Encoder":
        self._fit(list(records))
        self._fitted = True
        return self

    def _fit(self, records: list[FeatureRecord]) -> None:
        raise NotImplementedError

    def transform(self, records: Sequence[FeatureRecord]) -> EncodedDataset:
        raise NotImplementedError

    def _require_fitted(self):
        if not self._fitted:
            raise NotFittedError(f"{type(self).__name__}.transform called before fit")

    def describe(self) -> str:
        raise NotImplementedError
