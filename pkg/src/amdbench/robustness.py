"""Feature-level obfuscation transforms and adversarial attacks.

Obfuscation simulates the four APK-level strategies as deterministic,
label-preserving edits of feature records.  Attacks operate on binary feature
vectors under the addition-only constraint: perturbations may only set absent
features present (0 -> 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .data import KIND_DENSE, EncodedDataset
from .features import (
    EXTERNAL_API,
    INTERNAL,
    FeatureRecord,
    GraphNode,
    ProgramGraph,
)
from .models import SubstituteMLP, SubstituteMLPSpec, TrainConfig, build_model, fit

REFLECT_API = "reflect::invoke"
CRYPTO_API = "javax.crypto.Cipher.getInstance"


class ObfuscationKind(str, Enum):
    RENAME_IDENTIFIERS = "rename_identifiers"
    ENCRYPT_RESOURCES = "encrypt_resources"
    MODIFY_CODE = "modify_code"
    REFLECT_INVOCATION = "reflect_invocation"


class NotAttackableError(ValueError):
    pass


def _token(rng: np.random.Generator, prefix: str) -> str:
    return f"{prefix}{rng.integers(0, 2**48):012x}"


def obfuscate(
    record: FeatureRecord,
    kind: ObfuscationKind | str,
    seed: int = 0,
    intensity: float = 1.0,
) -> FeatureRecord:
    """Apply one feature-level obfuscation strategy; label preserved."""
    kind = ObfuscationKind(kind)
    if not 0 < intensity <= 1:
        raise ValueError(f"intensity {intensity} outside (0, 1]")
    rng = np.random.default_rng(seed)
    if kind == ObfuscationKind.RENAME_IDENTIFIERS:
        return _rename_identifiers(record, rng)
    if kind == ObfuscationKind.ENCRYPT_RESOURCES:
        return _encrypt_resources(record, rng)
    if kind == ObfuscationKind.MODIFY_CODE:
        return _modify_code(record, rng, intensity)
    return _reflect_invocation(record, rng, intensity)


def _rename_identifiers(record: FeatureRecord, rng: np.random.Generator) -> FeatureRecord:
    components = frozenset(
        (kind, _token(rng, "Obf")) for kind, _name in sorted(record.manifest.components)
    )
    strings = frozenset(_token(rng, "s_") for _ in sorted(record.code.code_strings))
    return replace(
        record,
        manifest=replace(record.manifest, components=components),
        code=replace(record.code, code_strings=strings),
    )


def _encrypt_resources(record: FeatureRecord, rng: np.random.Generator) -> FeatureRecord:
    resources = frozenset(_token(rng, "enc_") for _ in sorted(record.manifest.resources))
    # strings that referenced a resource entry disappear with the encryption
    strings = frozenset(
        s for s in record.code.code_strings if s not in record.manifest.resources
    )
    api_calls = dict(record.code.api_calls)
    api_calls[CRYPTO_API] = api_calls.get(CRYPTO_API, 0) + 1
    graph = record.graph
    next_id = max((n.node_id for n in graph.nodes), default=-1) + 1
    crypto_node = GraphNode(next_id, EXTERNAL_API, api_name=CRYPTO_API, sensitive=False)
    internal = [n.node_id for n in graph.nodes if n.kind == INTERNAL]
    nodes = graph.nodes + (crypto_node,)
    edges = graph.edges
    if internal:
        caller = internal[int(rng.integers(len(internal)))]
        edges = edges + ((caller, next_id),)
    return replace(
        record,
        manifest=replace(record.manifest, resources=resources),
        code=replace(record.code, api_calls=api_calls, code_strings=strings),
        graph=ProgramGraph(nodes=nodes, edges=edges),
    )


def _modify_code(
    record: FeatureRecord, rng: np.random.Generator, intensity: float
) -> FeatureRecord:
    graph = record.graph
    n_nodes = graph.n_nodes()
    n_junk = math.ceil(intensity * n_nodes)
    next_id = max((n.node_id for n in graph.nodes), default=-1) + 1
    nodes = list(graph.nodes)
    edges = list(graph.edges)
    for _ in range(n_junk):
        junk = GraphNode(next_id, INTERNAL)
        nodes.append(junk)
        if edges:
            pick = int(rng.integers(len(edges)))
            a, b = edges.pop(pick)
            edges.append((a, next_id))
            edges.append((next_id, b))
        next_id += 1
    opcodes = list(record.code.opcode_seq)
    n_grams = max(1, math.ceil(intensity * max(1, len(opcodes) // 16)))
    for _ in range(n_grams):
        gram = [int(v) for v in rng.integers(0, 256, size=3)]
        pos = int(rng.integers(0, len(opcodes) + 1))
        opcodes[pos:pos] = gram
    return replace(
        record,
        code=replace(record.code, opcode_seq=tuple(opcodes)),
        graph=ProgramGraph(nodes=tuple(nodes), edges=tuple(edges)),
    )


def _reflect_invocation(
    record: FeatureRecord, rng: np.random.Generator, intensity: float
) -> FeatureRecord:
    graph = record.graph
    sensitive_ids = {n.node_id for n in graph.nodes if n.sensitive}
    by_id = graph.node_by_id()
    in_edges = [(s, d) for s, d in graph.edges if d in sensitive_ids]
    if not in_edges:
        return record
    n_reroute = math.ceil(intensity * len(in_edges))
    order = rng.permutation(len(in_edges))[:n_reroute]
    reroute = {in_edges[i] for i in order}
    next_id = max(n.node_id for n in graph.nodes) + 1
    reflect_node = GraphNode(next_id, EXTERNAL_API, api_name=REFLECT_API, sensitive=False)
    edges = []
    moved_names = set()
    for s, d in graph.edges:
        if (s, d) in reroute:
            edges.append((s, next_id))
            name = by_id[d].api_name
            if name:
                moved_names.add(name)
        else:
            edges.append((s, d))
    strings = frozenset(set(record.code.code_strings) | moved_names)
    return replace(
        record,
        code=replace(record.code, code_strings=strings),
        graph=ProgramGraph(nodes=graph.nodes + (reflect_node,), edges=tuple(edges)),
    )


def direct_sensitive_indegree(graph: ProgramGraph) -> int:
    sensitive_ids = {n.node_id for n in graph.nodes if n.sensitive}
    return sum(1 for _s, d in graph.edges if d in sensitive_ids)


# ---------------------------------------------------------------------------
# Adversarial attacks


@dataclass(frozen=True)
class AttackOutcome:
    n_total: int
    n_success: int
    flips_per_success: tuple[int, ...]
    features_total: int
    n_removals: int = 0  # 1->0 flips observed by the constraint audit (must be 0)

    def __post_init__(self):
        if not 0 <= self.n_success <= self.n_total:
            raise ValueError("n_success outside [0, n_total]")

    @property
    def asr(self) -> float:
        return self.n_success / self.n_total if self.n_total else 0.0

    def apr(self) -> tuple[float, bool]:
        """(average perturbation ratio, undefined_flag); 0 with flag when no success."""
        if not self.flips_per_success:
            return 0.0, True
        mean_flips = sum(self.flips_per_success) / len(self.flips_per_success)
        return mean_flips / self.features_total, False


def train_substitute(
    train: EncodedDataset, seed: int = 0, cfg: TrainConfig | None = None
) -> SubstituteMLP:
    """Two-layer differentiable substitute trained on the target's encoding."""
    if train.kind != KIND_DENSE or isinstance(train.payload, tuple):
        raise NotAttackableError("substitute training needs a single dense matrix")
    x = np.asarray(train.payload)
    uniq = np.unique(x)
    if not np.all(np.isin(uniq, (0.0, 1.0))):
        raise NotAttackableError("substitute training needs binary features")
    if train.n_rows == 0:
        raise ValueError("empty training set")
    cfg = cfg or TrainConfig(seed=seed, max_epochs=30, patience=5)
    if cfg.seed != seed:
        cfg = replace(cfg, seed=seed)
    model = build_model(SubstituteMLPSpec())
    fit(model, train, train, cfg)
    return model


def jsma_attack(
    substitute: SubstituteMLP, x: np.ndarray, budget: int
) -> tuple[np.ndarray, int]:
    """Saliency-guided 0->1 flips until the substitute predicts benign.

    Flips the zero-valued feature with the most negative malicious-score
    gradient each step, up to *budget* flips.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    x_adv = np.array(x, dtype=float).copy()
    flips = 0
    if substitute.logit_of(x_adv) <= 0:
        return x_adv, 0
    for _ in range(budget):
        grad = substitute.input_gradient(x_adv)
        zeros = np.flatnonzero(x_adv == 0)
        if len(zeros) == 0:
            break
        pick = zeros[int(np.argmin(grad[zeros]))]
        x_adv[pick] = 1.0
        flips += 1
        if substitute.logit_of(x_adv) <= 0:
            break
    return x_adv, flips


def randomized_input(x: np.ndarray, fraction: float, seed: int = 0) -> np.ndarray:
    """Flip ceil(fraction * #zeros) uniformly chosen zero positions to 1."""
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction {fraction} outside (0, 1]")
    x_adv = np.array(x, dtype=float).copy()
    zeros = np.flatnonzero(x_adv == 0)
    if len(zeros) == 0:
        return x_adv
    n_flip = math.ceil(fraction * len(zeros))
    rng = np.random.default_rng(seed)
    picks = rng.choice(zeros, size=n_flip, replace=False)
    x_adv[picks] = 1.0
    return x_adv


@dataclass(frozen=True)
class JsmaSpec:
    budget: int | None = None  # default max(50, 1% of feature count)

    def resolve_budget(self, n_features: int) -> int:
        return self.budget if self.budget is not None else max(50, n_features // 100)


@dataclass(frozen=True)
class RandomizedInputSpec:
    fraction: float = 0.05


AttackSpec = JsmaSpec | RandomizedInputSpec


def evaluate_attack(
    score_fn,
    train_encoded: EncodedDataset,
    malicious_vectors: np.ndarray,
    attack: AttackSpec,
    seed: int = 0,
) -> AttackOutcome:
    """Run an attack against a fitted detector on its own binary encoding.

    ``score_fn`` maps a feature matrix to malicious decisions (bool per row).
    Attacked samples are the malicious rows the detector currently catches;
    success = the decision flips to benign on the adversarial features.  The
    constraint audit counts (and forbids) any 1->0 flip.
    """
    x = np.asarray(malicious_vectors, dtype=float)
    if x.ndim != 2:
        raise ValueError("malicious_vectors must be a 2-D matrix")
    detected = score_fn(x)
    targets = np.flatnonzero(detected)
    n_features = x.shape[1]
    substitute = None
    if isinstance(attack, JsmaSpec):
        substitute = train_substitute(train_encoded, seed=seed)
        budget = attack.resolve_budget(n_features)
    adv_rows = []
    flips_list = []
    removals = 0
    for i in targets:
        if isinstance(attack, JsmaSpec):
            adv, flips = jsma_attack(substitute, x[i], budget)
        else:
            adv = randomized_input(x[i], attack.fraction, seed=seed + int(i))
            flips = int(np.sum((adv == 1) & (x[i] == 0)))
        removals += int(np.sum((x[i] == 1) & (adv == 0)))
        adv_rows.append(adv)
        flips_list.append(flips)
    if removals:
        raise AssertionError(f"addition-only constraint violated: {removals} removals")
    if not len(targets):
        return AttackOutcome(0, 0, (), n_features)
    still_detected = score_fn(np.stack(adv_rows))
    successes = [
        (i, flips)
        for (i, flips), caught in zip(zip(targets, flips_list), still_detected)
        if not caught
    ]
    return AttackOutcome(
        n_total=len(targets),
        n_success=len(successes),
        flips_per_success=tuple(flips for _i, flips in successes),
        features_total=n_features,
        n_removals=removals,
    )
