"""The twelve detector pipelines: encoder + model + training defaults."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import KIND_DENSE, EncodedDataset
from .encoders import (
    DREBIN_CATEGORIES,
    RAMDA_CATEGORIES,
    XMAL_CATEGORIES,
    ApiPermissionMap,
    CategoryBinaryEncoder,
    Encoder,
    HinDroidKernelEncoder,
    HomDroidEncoder,
    MalScanEncoder,
    MamaDroidEncoder,
    MsDroidEncoder,
    MultimodalEncoder,
    OpcodeImageEncoder,
    SdacEncoder,
    TokenSequenceEncoder,
)
from .features import FeatureRecord, SensitiveApiCatalog
from .graphs import FamilyAbstraction
from .models import (
    AEClassifierSpec,
    AttentionMLPSpec,
    CNNSpec,
    GNNSpec,
    KNNSpec,
    KernelSVMSpec,
    LSTMSpec,
    LinearSVMSpec,
    ModelSpec,
    MultimodalMLPSpec,
    RandomForestSpec,
    TrainConfig,
    build_model,
    fit,
    predict_labels,
    predict_scores,
)

APPROACH_TAGS = (
    "drebin",
    "mamadroid",
    "mclaughlin",
    "hindroid",
    "deeprefiner",
    "kim",
    "malscan",
    "sdac",
    "homdroid",
    "xmal",
    "ramda",
    "msdroid",
)


@dataclass(frozen=True)
class PipelineConfig:
    """Shared knobs resolved once per run; paper-scale values stay reachable."""

    catalog: SensitiveApiCatalog
    desk_scale_factor: int = 10
    max_epochs: int = 20
    patience: int = 5
    centrality: str = "degree"
    k_hops: int = 2
    mclaughlin_maxlen: int = 2048
    deeprefiner_maxlen: int = 4096
    opcode_vocab: int = 256
    sdac_k_max: int = 1000
    sdac_walk_len: int = 64
    sdac_max_paths: int = 16
    multimodal_max_ngrams: int = 2048
    families: tuple[str, ...] = FamilyAbstraction().families
    perm_map: ApiPermissionMap = field(default_factory=ApiPermissionMap)

    def abstraction(self) -> FamilyAbstraction:
        return FamilyAbstraction(families=self.families)


@dataclass(frozen=True)
class ApproachDef:
    tag: str
    encoder_factory: Callable[[PipelineConfig, int], Encoder]
    model_spec_factory: Callable[[PipelineConfig], ModelSpec]
    repeats: int = 1


APPROACHES: dict[str, ApproachDef] = {
    "drebin": ApproachDef(
        "drebin",
        lambda cfg, seed: CategoryBinaryEncoder(DREBIN_CATEGORIES, approach="drebin"),
        lambda cfg: LinearSVMSpec(C=1.0, max_iter=1000),
    ),
    "mamadroid": ApproachDef(
        "mamadroid",
        lambda cfg, seed: MamaDroidEncoder(cfg.abstraction()),
        lambda cfg: RandomForestSpec(),
    ),
    "mclaughlin": ApproachDef(
        "mclaughlin",
        lambda cfg, seed: OpcodeImageEncoder(cfg.opcode_vocab, cfg.mclaughlin_maxlen),
        lambda cfg: CNNSpec(filters=32, kernel_width=7, fc=16, lr=0.01, batch=32),
    ),
    "hindroid": ApproachDef(
        "hindroid",
        lambda cfg, seed: HinDroidKernelEncoder(),
        lambda cfg: KernelSVMSpec(C=1.0),
    ),
    "deeprefiner": ApproachDef(
        "deeprefiner",
        lambda cfg, seed: TokenSequenceEncoder(cfg.deeprefiner_maxlen),
        lambda cfg: LSTMSpec(layers=2, embed=16, hidden=64, lr=0.001, batch=32),
    ),
    "kim": ApproachDef(
        "kim",
        lambda cfg, seed: MultimodalEncoder(cfg.multimodal_max_ngrams),
        lambda cfg: MultimodalMLPSpec(),
    ),
    "malscan": ApproachDef(
        "malscan",
        lambda cfg, seed: MalScanEncoder(cfg.catalog, cfg.centrality),
        lambda cfg: KNNSpec(k=3),
    ),
    "sdac": ApproachDef(
        "sdac",
        lambda cfg, seed: SdacEncoder(
            embedding_dim=10,
            k_max=cfg.sdac_k_max,
            walk_len=cfg.sdac_walk_len,
            max_paths=cfg.sdac_max_paths,
            seed=seed,
        ),
        lambda cfg: LinearSVMSpec(C=1.0, max_iter=5000),
        repeats=5,
    ),
    "homdroid": ApproachDef(
        "homdroid",
        lambda cfg, seed: HomDroidEncoder(cfg.catalog),
        lambda cfg: KNNSpec(k=1),
    ),
    "xmal": ApproachDef(
        "xmal",
        lambda cfg, seed: CategoryBinaryEncoder(XMAL_CATEGORIES, approach="xmal"),
        lambda cfg: AttentionMLPSpec(),
    ),
    "ramda": ApproachDef(
        "ramda",
        lambda cfg, seed: CategoryBinaryEncoder(RAMDA_CATEGORIES, approach="ramda"),
        lambda cfg: AEClassifierSpec(),
    ),
    "msdroid": ApproachDef(
        "msdroid",
        lambda cfg, seed: MsDroidEncoder(
            cfg.catalog, cfg.k_hops, cfg.abstraction(), cfg.perm_map
        ),
        lambda cfg: GNNSpec(),
    ),
}


class UnknownApproachError(ValueError):
    def __init__(self, tag: str):
        super().__init__(f"unknown approach {tag!r}; valid tags: {', '.join(APPROACH_TAGS)}")
        self.tag = tag


def approach(tag: str) -> ApproachDef:
    if tag not in APPROACHES:
        raise UnknownApproachError(tag)
    return APPROACHES[tag]


def cell_seed(*parts: int | str) -> int:
    """Stable 32-bit seed from mixed int/str parts (seed-isolation helper)."""
    acc = 0x811C9DC5
    for part in parts:
        data = str(part).encode()
        acc = zlib.crc32(data, acc)
    return int(acc) & 0x7FFFFFFF


@dataclass
class FittedPipeline:
    tag: str
    encoder: Encoder
    model: object
    spec: ModelSpec
    train_encoded: EncodedDataset
    train_cfg: TrainConfig

    def encode(self, records: Sequence[FeatureRecord]) -> EncodedDataset:
        return self.encoder.transform(records)

    def predict(self, records: Sequence[FeatureRecord]) -> np.ndarray:
        return predict_labels(self.model, self.encode(records))

    def scores(self, records: Sequence[FeatureRecord]) -> np.ndarray:
        return predict_scores(self.model, self.encode(records))

    def is_binary_vector(self) -> bool:
        return self.train_encoded.kind == KIND_DENSE and bool(
            self.train_encoded.meta.get("binary")
        )

    def decide_matrix(self, matrix: np.ndarray) -> np.ndarray:
        """Malicious decision per row of a raw feature matrix (attack surface)."""
        ds = EncodedDataset(
            kind=KIND_DENSE,
            payload=np.asarray(matrix, dtype=float),
            row_ids=tuple(f"adv{i}" for i in range(len(matrix))),
            labels=np.zeros(len(matrix), dtype=np.int64),
            meta={"binary": True},
        )
        return predict_labels(self.model, ds).astype(bool)


def fit_pipeline(
    tag: str,
    train_records: Sequence[FeatureRecord],
    val_records: Sequence[FeatureRecord],
    cfg: PipelineConfig,
    seed: int = 0,
) -> FittedPipeline:
    definition = approach(tag)
    encoder = definition.encoder_factory(cfg, seed)
    encoder.fit(train_records)
    train_ds = encoder.transform(train_records)
    val_ds = encoder.transform(val_records) if len(val_records) else None
    spec = definition.model_spec_factory(cfg)
    model = build_model(spec)
    train_cfg = TrainConfig(
        max_epochs=cfg.max_epochs,
        patience=cfg.patience,
        seed=seed,
        desk_scale_factor=cfg.desk_scale_factor,
    )
    fit(model, train_ds, val_ds, train_cfg)
    return FittedPipeline(
        tag=tag,
        encoder=encoder,
        model=model,
        spec=spec,
        train_encoded=train_ds,
        train_cfg=train_cfg,
    )
