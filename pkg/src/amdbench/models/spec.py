"""Model specifications (the zoo's tagged union) and the shared training config."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union


def _check_positive(**kv):
    for name, value in kv.items():
        if value is not None and value <= 0:
            raise ValueError(f"{name} must be > 0, got {value}")


@dataclass(frozen=True)
class LinearSVMSpec:
    C: float = 1.0
    max_iter: int = 1000
    tol: float = 1e-4
    class_weight: str | None = "balanced"  # per-class cost C_i = C * n / (2 n_class)

    def __post_init__(self):
        _check_positive(C=self.C, max_iter=self.max_iter, tol=self.tol)


@dataclass(frozen=True)
class KernelSVMSpec:
    """SVM on a precomputed kernel; bias absorbed via a unit kernel offset."""

    C: float = 1.0
    max_iter: int = 2000
    tol: float = 1e-6
    class_weight: str | None = "balanced"

    def __post_init__(self):
        _check_positive(C=self.C, max_iter=self.max_iter, tol=self.tol)


@dataclass(frozen=True)
class KNNSpec:
    k: int = 3

    def __post_init__(self):
        _check_positive(k=self.k)


@dataclass(frozen=True)
class RandomForestSpec:
    n_trees: int = 100
    max_depth: int | None = None

    def __post_init__(self):
        _check_positive(n_trees=self.n_trees, max_depth=self.max_depth)


@dataclass(frozen=True)
class MultimodalMLPSpec:
    tower_layers: tuple[int, ...] = (5000, 2500, 1000)
    merge_layers: tuple[int, ...] = (1000, 500, 100, 10)
    lr: float = 0.001
    batch: int = 32

    def __post_init__(self):
        _check_positive(lr=self.lr, batch=self.batch)
        if any(w < 1 for w in self.tower_layers + self.merge_layers):
            raise ValueError("layer widths must be >= 1")


@dataclass(frozen=True)
class AttentionMLPSpec:
    attn_hidden: int = 158
    mlp_layers: int = 3
    hidden: int = 64
    lr: float = 0.001
    batch: int = 20

    def __post_init__(self):
        _check_positive(
            attn_hidden=self.attn_hidden,
            mlp_layers=self.mlp_layers,
            hidden=self.hidden,
            lr=self.lr,
            batch=self.batch,
        )


@dataclass(frozen=True)
class LSTMSpec:
    layers: int = 2
    embed: int = 16
    hidden: int = 64
    lr: float = 0.001
    batch: int = 32

    def __post_init__(self):
        _check_positive(
            layers=self.layers, embed=self.embed, hidden=self.hidden, lr=self.lr, batch=self.batch
        )


@dataclass(frozen=True)
class CNNSpec:
    """Single conv layer over a one-hot opcode image; kernel spans the vocab axis."""

    filters: int = 32
    kernel_width: int = 7
    fc: int = 16
    lr: float = 0.01
    batch: int = 32

    def __post_init__(self):
        _check_positive(
            filters=self.filters,
            kernel_width=self.kernel_width,
            fc=self.fc,
            lr=self.lr,
            batch=self.batch,
        )


@dataclass(frozen=True)
class AEClassifierSpec:
    enc_layers: int = 3
    dec_layers: int = 3
    clf_layers: int = 4
    hidden: int = 600
    lr: float = 0.001
    batch: int = 64
    ae_epochs: int = 20
    recon_target: float = 30.0
    lambda1: float = 10.0
    lambda2: float = 1.0
    lambda3: float = 10.0

    def __post_init__(self):
        _check_positive(
            enc_layers=self.enc_layers,
            dec_layers=self.dec_layers,
            clf_layers=self.clf_layers,
            hidden=self.hidden,
            lr=self.lr,
            batch=self.batch,
            ae_epochs=self.ae_epochs,
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            lambda3=self.lambda3,
        )


@dataclass(frozen=True)
class GNNSpec:
    layers: int = 3
    hidden: int = 512
    fc_layers: int = 2
    fc_hidden: int = 512
    lr: float = 0.01
    batch: int = 64
    readout: str = "mean"
    app_aggregate: str = "max"

    def __post_init__(self):
        _check_positive(
            layers=self.layers,
            hidden=self.hidden,
            fc_layers=self.fc_layers,
            fc_hidden=self.fc_hidden,
            lr=self.lr,
            batch=self.batch,
        )
        if self.readout != "mean" or self.app_aggregate != "max":
            raise ValueError("only mean readout with max app aggregation is supported")


@dataclass(frozen=True)
class SubstituteMLPSpec:
    """Two-layer differentiable stand-in used by the adversarial harness."""

    hidden: int = 128
    lr: float = 0.001
    batch: int = 32

    def __post_init__(self):
        _check_positive(hidden=self.hidden, lr=self.lr, batch=self.batch)


ModelSpec = Union[
    LinearSVMSpec,
    KernelSVMSpec,
    KNNSpec,
    RandomForestSpec,
    MultimodalMLPSpec,
    AttentionMLPSpec,
    LSTMSpec,
    CNNSpec,
    AEClassifierSpec,
    GNNSpec,
    SubstituteMLPSpec,
]

NEURAL_SPECS = (
    MultimodalMLPSpec,
    AttentionMLPSpec,
    LSTMSpec,
    CNNSpec,
    AEClassifierSpec,
    GNNSpec,
    SubstituteMLPSpec,
)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0
    desk_scale_factor: int = 10

    def __post_init__(self):
        _check_positive(
            max_epochs=self.max_epochs, patience=self.patience, desk_scale_factor=self.desk_scale_factor
        )

    def width(self, w: int) -> int:
        """Desk-scaled layer width; factor 1 recovers the full-paper widths.

        Widths already at desk scale (<= 32) are kept, so the factor shrinks
        only the paper's large layers (e.g. Kim towers 5000/2500/1000 -> 500/250/100
        at the default factor 10).
        """
        return max(1, w // self.desk_scale_factor, min(w, 32))
