"""Labeling rule, scenario sampling, training downsampling, ablation, rolling splits.

Sampling is without replacement, uniform within (year, label) strata, and
deterministic under the scenario seed.  Grayware (1-3 detection positives) is
retained in corpora but never enters any split.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import (
    EXTERNAL_API,
    CodeFeatures,
    FeatureRecord,
    GraphNode,
    Label,
    ManifestFeatures,
    ProgramGraph,
)

FEATURE_KINDS = ("hardware", "app_intent", "permission", "api_call", "opcode", "code_string")


class ScenarioError(ValueError):
    """A scenario cannot be satisfied by the given corpus."""


@dataclass(frozen=True)
class DetectionReport:
    app_id: str
    positives: int

    def __post_init__(self):
        if self.positives < 0:
            raise ValueError(f"negative positives for {self.app_id!r}")


def apply_vt_rule(report: DetectionReport) -> Label:
    """p >= 4 -> malicious, p == 0 -> benign, otherwise grayware."""
    if report.positives >= 4:
        return Label.MALICIOUS
    if report.positives == 0:
        return Label.BENIGN
    return Label.GRAYWARE


def load_detection_reports(path: str | Path) -> list[DetectionReport]:
    """Read ``app_id,positives`` CSV (header optional)."""
    reports = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            if row[0] == "app_id":  # header
                continue
            reports.append(DetectionReport(app_id=row[0], positives=int(row[1])))
    return reports


def relabel(records: Sequence[FeatureRecord], reports: Sequence[DetectionReport]) -> list[FeatureRecord]:
    """Apply the detection-report labeling rule; apps without a report keep their label."""
    by_id = {rep.app_id: rep for rep in reports}
    out = []
    for r in records:
        rep = by_id.get(r.app_id)
        if rep is None:
            out.append(r)
        else:
            out.append(replace(r, label=apply_vt_rule(rep), vt_positives=rep.positives))
    return out


# ---------------------------------------------------------------------------
# Scenario sampling


@dataclass(frozen=True)
class ScenarioSpec:
    train_benign: int
    train_malicious: int
    val_benign: int
    val_malicious: int
    test_benign: int
    test_malicious: int
    stratify_by_year: bool = True
    seed: int = 0

    def __post_init__(self):
        counts = (
            self.train_benign,
            self.train_malicious,
            self.val_benign,
            self.val_malicious,
            self.test_benign,
            self.test_malicious,
        )
        if any(c < 0 for c in counts):
            raise ValueError("scenario counts must be >= 0")


@dataclass(frozen=True)
class DataSplit:
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]

    def all_ids(self) -> set[str]:
        return set(self.train) | set(self.validation) | set(self.test)


def _year_quota(total: int, years: Sequence[int]) -> dict[int, int]:
    """Split *total* across years as evenly as possible, remainders to earliest years."""
    n = len(years)
    base, rem = divmod(total, n)
    quota = {}
    for i, y in enumerate(sorted(years)):
        quota[y] = base + (1 if i < rem else 0)
    return quota


def sample_scenario(records: Sequence[FeatureRecord], spec: ScenarioSpec) -> DataSplit:
    """Draw disjoint train/validation/test id sets with exact per-class counts.

    Strata (per year when ``stratify_by_year``, otherwise per label) are
    shuffled once and train/validation/test consume successive prefixes, so
    the three sets are disjoint by construction.
    """
    rng = np.random.default_rng(spec.seed)
    eligible = [r for r in records if r.label in (Label.BENIGN, Label.MALICIOUS)]
    years = sorted({r.year for r in eligible})

    pools: dict[tuple, list[str]] = {}
    for r in eligible:
        key = (r.year, r.label) if spec.stratify_by_year else (r.label,)
        pools.setdefault(key, []).append(r.app_id)
    for key in sorted(pools, key=str):
        rng.shuffle(pools[key])
    cursors: dict[tuple, int] = {key: 0 for key in pools}

    def consume(key: tuple, want: int, set_name: str, label: Label) -> list[str]:
        ids = pools.get(key, [])
        cur = cursors.get(key, 0)
        if len(ids) - cur < want:
            where = f" for year {key[0]}" if len(key) == 2 else ""
            raise ScenarioError(
                f"{set_name}: need {want} {label.value} records{where}, "
                f"have {len(ids) - cur}"
            )
        cursors[key] = cur + want
        return ids[cur : cur + want]

    def take(label: Label, count: int, set_name: str) -> list[str]:
        if count == 0:
            return []
        if spec.stratify_by_year:
            if not years:
                raise ScenarioError(f"{set_name}: corpus has no eligible records")
            picked: list[str] = []
            for year, want in sorted(_year_quota(count, years).items()):
                picked.extend(consume((year, label), want, set_name, label))
            return picked
        return consume((label,), count, set_name, label)

    train = take(Label.BENIGN, spec.train_benign, "train") + take(
        Label.MALICIOUS, spec.train_malicious, "train"
    )
    val = take(Label.BENIGN, spec.val_benign, "validation") + take(
        Label.MALICIOUS, spec.val_malicious, "validation"
    )
    test = take(Label.BENIGN, spec.test_benign, "test") + take(
        Label.MALICIOUS, spec.test_malicious, "test"
    )
    return DataSplit(train=tuple(train), validation=tuple(val), test=tuple(test))


def downsample_training(
    records: Sequence[FeatureRecord],
    split: DataSplit,
    fraction: float,
    seed: int,
) -> DataSplit:
    """Shrink the training set to *fraction*, preserving the class ratio per class."""
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction {fraction} outside (0, 1]")
    if fraction == 1.0:
        return split
    labels = {r.app_id: r.label for r in records}
    benign = [i for i in split.train if labels[i] == Label.BENIGN]
    malicious = [i for i in split.train if labels[i] == Label.MALICIOUS]
    n_ben = round(len(benign) * fraction)
    n_mal = round(len(malicious) * fraction)
    rng = np.random.default_rng(seed)
    keep_ben = [benign[i] for i in sorted(rng.permutation(len(benign))[:n_ben])]
    keep_mal = [malicious[i] for i in sorted(rng.permutation(len(malicious))[:n_mal])]
    return DataSplit(
        train=tuple(keep_ben + keep_mal), validation=split.validation, test=split.test
    )


# ---------------------------------------------------------------------------
# Feature ablation


def ablate_features(record: FeatureRecord, removed: set[str]) -> FeatureRecord:
    """Empty the listed feature kinds; everything else is identical.

    ``app_intent`` clears components and intents jointly.  ``api_call`` clears
    the call multiset and strips api names off external graph nodes (topology
    preserved so graph encoders remain runnable).
    """
    unknown = set(removed) - set(FEATURE_KINDS)
    if unknown:
        raise ValueError(f"unknown feature kinds: {sorted(unknown)}")
    if not removed:
        return record

    manifest = record.manifest
    code = record.code
    graph = record.graph
    if "hardware" in removed:
        manifest = replace(manifest, hardware=frozenset())
    if "app_intent" in removed:
        manifest = replace(manifest, components=frozenset(), intents=frozenset())
    if "permission" in removed:
        manifest = replace(manifest, permissions=frozenset())
    if "api_call" in removed:
        code = replace(code, api_calls={})
        graph = ProgramGraph(
            nodes=tuple(
                GraphNode(n.node_id, n.kind, api_name=None, sensitive=False)
                if n.kind == EXTERNAL_API
                else n
                for n in graph.nodes
            ),
            edges=graph.edges,
        )
    if "opcode" in removed:
        code = replace(code, opcode_seq=())
    if "code_string" in removed:
        code = replace(code, code_strings=frozenset())
    return replace(record, manifest=manifest, code=code, graph=graph)


# ---------------------------------------------------------------------------
# Rolling evolution splits


@dataclass(frozen=True)
class EvolutionPlan:
    base_year: int
    horizon_months: int
    bucket_months: int = 3

    def __post_init__(self):
        if self.horizon_months % self.bucket_months:
            raise ValueError("horizon_months must be divisible by bucket_months")

    @property
    def n_buckets(self) -> int:
        return self.horizon_months // self.bucket_months


@dataclass(frozen=True)
class RollingSplits:
    base: DataSplit
    buckets: tuple[tuple[str, ...], ...]  # app_ids per post-base window


def rolling_splits(
    records: Sequence[FeatureRecord], plan: EvolutionPlan, seed: int
) -> RollingSplits:
    """8:1:1 split of the base year plus disjoint post-base test buckets."""
    eligible = [r for r in records if r.label in (Label.BENIGN, Label.MALICIOUS)]
    horizon_end = plan.base_year * 12 + 12 + plan.horizon_months  # months since year 0
    max_month = max((r.year * 12 + r.month for r in eligible), default=0)
    if max_month < horizon_end:
        raise ScenarioError(
            f"corpus ends before base_year+{plan.horizon_months} months"
        )
    base_records = [r for r in eligible if r.year == plan.base_year]
    if not base_records:
        raise ScenarioError(f"no records in base year {plan.base_year}")

    rng = np.random.default_rng(seed)
    ids = [r.app_id for r in base_records]
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n = len(shuffled)
    n_train = int(n * 0.8)
    n_val = int(n * 0.1)
    base = DataSplit(
        train=tuple(shuffled[:n_train]),
        validation=tuple(shuffled[n_train : n_train + n_val]),
        test=tuple(shuffled[n_train + n_val :]),
    )

    base_end = plan.base_year * 12 + 12  # first month index after the base year
    buckets: list[tuple[str, ...]] = []
    for j in range(plan.n_buckets):
        lo = base_end + j * plan.bucket_months
        hi = lo + plan.bucket_months
        bucket = tuple(
            r.app_id for r in eligible if lo <= (r.year * 12 + r.month - 1) < hi
        )
        buckets.append(bucket)
    return RollingSplits(base=base, buckets=tuple(buckets))


def split_records(
    records: Sequence[FeatureRecord], ids: Sequence[str]
) -> list[FeatureRecord]:
    """Materialize records for a list of app ids, preserving id order."""
    by_id = {r.app_id: r for r in records}
    return [by_id[i] for i in ids]
