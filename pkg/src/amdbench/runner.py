"""Config-driven experiment grids: scenarios x detectors -> CSV/Markdown reports.

Every cell is deterministic under (config seed, scenario seed, approach,
repeat); changing one scenario block's seed cannot affect any other block.
Cell failures are recorded in the report (the run continues unless
``fail_fast``), and the manifest lists every emitted file.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import metrics as mx
from .corpus import (
    DataSplit,
    EvolutionPlan,
    ScenarioSpec,
    ablate_features,
    downsample_training,
    rolling_splits,
    sample_scenario,
    split_records,
)
from .features import FeatureRecord, Label, SensitiveApiCatalog, read_records
from .pipelines import (
    APPROACHES,
    PipelineConfig,
    UnknownApproachError,
    approach as approach_def,
    cell_seed,
    fit_pipeline,
)
from .profiler import TimingRecord, time_phase, timer_overhead, write_timings_csv
from .robustness import (
    AttackOutcome,
    JsmaSpec,
    NotAttackableError,
    ObfuscationKind,
    RandomizedInputSpec,
    evaluate_attack,
    obfuscate,
    train_substitute,
)
from .synth import SynthSpec, generate, sensitive_catalog

if sys.version_info >= (3, 11):  # pragma: no cover
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


SCENARIO_TYPES = ("ratio", "downsample", "ablation", "obfuscation", "attack", "evolution")


@dataclass
class DetectorConfig:
    approach: str
    repeats: int | None = None  # None -> approach default (sdac: 5)


@dataclass
class ScenarioConfig:
    name: str
    type: str
    seed: int
    options: dict = field(default_factory=dict)

    def split_spec(self) -> ScenarioSpec:
        o = self.options
        try:
            return ScenarioSpec(
                train_benign=int(o["train_benign"]),
                train_malicious=int(o["train_malicious"]),
                val_benign=int(o.get("val_benign", 0)),
                val_malicious=int(o.get("val_malicious", 0)),
                test_benign=int(o["test_benign"]),
                test_malicious=int(o["test_malicious"]),
                stratify_by_year=bool(o.get("stratify_by_year", True)),
                seed=self.seed,
            )
        except KeyError as exc:
            raise ConfigError(f"scenario {self.name!r} missing count {exc}") from exc


@dataclass
class RunnerConfig:
    corpus_path: str | None
    synth_spec: SynthSpec | None
    catalog_path: str | None
    detectors: list[DetectorConfig]
    scenarios: list[ScenarioConfig]
    seed: int = 0
    jobs: int = 1
    plots: bool = False
    out: str = "reports"
    pipeline_options: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def load_config(path: str | Path) -> RunnerConfig:
    try:
        with Path(path).open("rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config does not parse: {exc}")

    corpus = raw.get("corpus", {})
    synth_spec = None
    corpus_path = corpus.get("path")
    if "synth" in corpus:
        try:
            synth_spec = SynthSpec(**{
                k: tuple(v) if isinstance(v, list) else v for k, v in corpus["synth"].items()
            })
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad [corpus.synth] table: {exc}")
    if corpus_path is None and synth_spec is None:
        raise ConfigError("config needs [corpus].path or a [corpus.synth] table")

    detectors = []
    for d in raw.get("detectors", []):
        tag = d.get("approach")
        if tag not in APPROACHES:
            raise UnknownApproachError(str(tag))
        detectors.append(DetectorConfig(approach=tag, repeats=d.get("repeats")))
    if not detectors:
        raise ConfigError("config lists no [[detectors]]")

    scenarios = []
    for s in raw.get("scenarios", []):
        name = s.get("name")
        stype = s.get("type")
        if not name:
            raise ConfigError("every [[scenarios]] block needs a name")
        if stype not in SCENARIO_TYPES:
            raise ConfigError(
                f"scenario {name!r}: unknown type {stype!r}; valid: {', '.join(SCENARIO_TYPES)}"
            )
        options = {k: v for k, v in s.items() if k not in ("name", "type", "seed")}
        scenarios.append(ScenarioConfig(name=name, type=stype, seed=int(s.get("seed", 0)), options=options))
    if not scenarios:
        raise ConfigError("config lists no [[scenarios]]")

    return RunnerConfig(
        corpus_path=corpus_path,
        synth_spec=synth_spec,
        catalog_path=corpus.get("catalog"),
        detectors=detectors,
        scenarios=scenarios,
        seed=int(raw.get("seed", 0)),
        jobs=int(raw.get("jobs", 1)),
        plots=bool(raw.get("plots", False)),
        out=str(raw.get("out", "reports")),
        pipeline_options=dict(raw.get("pipeline", {})),
        raw=raw,
    )


def load_corpus(config: RunnerConfig) -> tuple[list[FeatureRecord], SensitiveApiCatalog]:
    if config.synth_spec is not None:
        return generate(config.synth_spec), sensitive_catalog(config.synth_spec)
    records = read_records(config.corpus_path)
    if not config.catalog_path:
        raise ConfigError("[corpus].catalog is required when loading a corpus file")
    return records, SensitiveApiCatalog.from_file(config.catalog_path)


def build_pipeline_config(config: RunnerConfig, catalog: SensitiveApiCatalog) -> PipelineConfig:
    opts = dict(config.pipeline_options)
    known = {
        "desk_scale_factor",
        "max_epochs",
        "patience",
        "centrality",
        "k_hops",
        "mclaughlin_maxlen",
        "deeprefiner_maxlen",
        "opcode_vocab",
        "sdac_k_max",
        "sdac_walk_len",
        "sdac_max_paths",
        "multimodal_max_ngrams",
    }
    unknown = set(opts) - known
    if unknown:
        raise ConfigError(f"unknown [pipeline] options: {sorted(unknown)}")
    return PipelineConfig(catalog=catalog, **opts)


# ---------------------------------------------------------------------------
# Rows


@dataclass(frozen=True)
class MetricRow:
    approach: str
    scenario: str
    metric: str
    value: float | None
    flags: str = ""


@dataclass(frozen=True)
class AttackRow:
    approach: str
    attack: str
    asr: float | None
    apr: float | None
    budget: int | None
    seed: int
    flags: str = ""


@dataclass(frozen=True)
class EvolutionRow:
    approach: str
    repeat: int
    metric: str
    horizon_months: tuple[int, ...]
    auts: tuple[float, ...]
    series: tuple[float, ...]
    missing: tuple[bool, ...]
    flags: str = ""


@dataclass
class CellResult:
    cell: dict
    metric_rows: list[MetricRow] = field(default_factory=list)
    attack_rows: list[AttackRow] = field(default_factory=list)
    evolution_rows: list[EvolutionRow] = field(default_factory=list)
    timings: list[TimingRecord] = field(default_factory=list)
    error: str | None = None


def _test_labels(records: Sequence[FeatureRecord]) -> list[int]:
    return [1 if r.label == Label.MALICIOUS else 0 for r in records]


def _metric_rows(
    approach: str, scenario: str, labels: list[int], preds: list[int], flags: str = ""
) -> list[MetricRow]:
    counts = mx.confusion(labels, preds)
    rows = []
    for name in mx.METRIC_NAMES:
        extra = "0/0" if mx.metric_undefined(name, counts) else ""
        joined = ";".join(x for x in (flags, extra) if x)
        rows.append(MetricRow(approach, scenario, name, mx.metric(name, counts), joined))
    return rows


# ---------------------------------------------------------------------------
# Cell execution


def run_cell(
    scenario: ScenarioConfig,
    detector: DetectorConfig,
    repeat: int,
    records: Sequence[FeatureRecord],
    pipe_cfg: PipelineConfig,
    global_seed: int,
) -> CellResult:
    seed = cell_seed(global_seed, scenario.seed, detector.approach, repeat)
    cell = {
        "approach": detector.approach,
        "scenario": scenario.name,
        "repeat": repeat,
        "seed": seed,
    }
    result = CellResult(cell=cell)
    try:
        if scenario.type == "evolution":
            _run_evolution_cell(scenario, detector, repeat, seed, records, pipe_cfg, result)
        elif scenario.type == "attack":
            _run_attack_cell(scenario, detector, repeat, seed, records, pipe_cfg, result)
        else:
            _run_split_cell(scenario, detector, repeat, seed, records, pipe_cfg, result)
    except Exception as exc:  # cell-level isolation; run continues
        timing = getattr(exc, "timing_record", None)
        if timing is not None:
            result.timings.append(timing)
        result.error = f"{type(exc).__name__}: {exc}"
        result.metric_rows.append(
            MetricRow(detector.approach, scenario.name, "f1", None, f"error:{type(exc).__name__}")
        )
    return result


def _fit_and_score(
    tag: str,
    train: list[FeatureRecord],
    val: list[FeatureRecord],
    test_sets: list[tuple[str, list[FeatureRecord]]],
    pipe_cfg: PipelineConfig,
    seed: int,
    result: CellResult,
    year: int | None = None,
):
    pipeline, t_train = time_phase(
        lambda: fit_pipeline(tag, train, val, pipe_cfg, seed=seed),
        approach=tag,
        phase="train",
        n_items=len(train),
        year=year,
    )
    result.timings.append(t_train)
    outputs = []
    for label, recs in test_sets:
        preds, t_test = time_phase(
            lambda recs=recs: list(pipeline.predict(recs)),
            approach=tag,
            phase="test",
            n_items=len(recs),
            year=year,
        )
        result.timings.append(t_test)
        outputs.append((label, recs, preds))
    return pipeline, outputs


def _run_split_cell(scenario, detector, repeat, seed, records, pipe_cfg, result):
    tag = detector.approach
    spec = scenario.split_spec()
    split = sample_scenario(records, spec)
    rflag = f"repeat:{repeat}"

    if scenario.type == "downsample":
        fractions = [float(f) for f in scenario.options.get("fractions", [1.0, 0.5, 0.1])]
        for fraction in fractions:
            sub = downsample_training(records, split, fraction, seed=seed)
            train = split_records(records, sub.train)
            val = split_records(records, sub.validation)
            test = split_records(records, sub.test)
            name = f"{scenario.name}@{fraction:g}"
            _pipeline, outputs = _fit_and_score(
                tag, train, val, [(name, test)], pipe_cfg, seed, result
            )
            for label, recs, preds in outputs:
                result.metric_rows.extend(
                    _metric_rows(tag, label, _test_labels(recs), preds, rflag)
                )
        return

    train = split_records(records, split.train)
    val = split_records(records, split.validation)
    test = split_records(records, split.test)

    if scenario.type == "ratio":
        _pipeline, outputs = _fit_and_score(
            tag, train, val, [(scenario.name, test)], pipe_cfg, seed, result
        )
        for label, recs, preds in outputs:
            result.metric_rows.extend(_metric_rows(tag, label, _test_labels(recs), preds, rflag))
        return

    if scenario.type == "ablation":
        removed_sets = [set(r) for r in scenario.options.get("removed", [])]
        for removed in [set()] + removed_sets:
            atrain = [ablate_features(r, removed) for r in train]
            aval = [ablate_features(r, removed) for r in val]
            atest = [ablate_features(r, removed) for r in test]
            suffix = "original" if not removed else "w/o " + "+".join(sorted(removed))
            name = f"{scenario.name}:{suffix}"
            _pipeline, outputs = _fit_and_score(
                tag, atrain, aval, [(name, atest)], pipe_cfg, seed, result
            )
            for label, recs, preds in outputs:
                result.metric_rows.extend(
                    _metric_rows(tag, label, _test_labels(recs), preds, rflag)
                )
        return

    if scenario.type == "obfuscation":
        kinds = scenario.options.get("kinds", [k.value for k in ObfuscationKind])
        intensity = float(scenario.options.get("intensity", 1.0))
        test_sets: list[tuple[str, list[FeatureRecord]]] = [(f"{scenario.name}:none", test)]
        for kind in kinds:
            obf = [
                obfuscate(r, kind, seed=cell_seed(seed, kind, r.app_id), intensity=intensity)
                for r in test
            ]
            test_sets.append((f"{scenario.name}:{kind}", obf))
        _pipeline, outputs = _fit_and_score(tag, train, val, test_sets, pipe_cfg, seed, result)
        for label, recs, preds in outputs:
            result.metric_rows.extend(_metric_rows(tag, label, _test_labels(recs), preds, rflag))
        return

    raise ConfigError(f"unhandled scenario type {scenario.type!r}")


def _run_attack_cell(scenario, detector, repeat, seed, records, pipe_cfg, result):
    tag = detector.approach
    spec = scenario.split_spec()
    split = sample_scenario(records, spec)
    train = split_records(records, split.train)
    val = split_records(records, split.validation)
    test = split_records(records, split.test)
    pipeline, t_train = time_phase(
        lambda: fit_pipeline(tag, train, val, pipe_cfg, seed=seed),
        approach=tag,
        phase="train",
        n_items=len(train),
    )
    result.timings.append(t_train)

    methods = [str(m) for m in scenario.options.get("methods", ["jsma", "ri"])]
    budget = scenario.options.get("budget")
    fraction = float(scenario.options.get("fraction", 0.05))

    malicious = [r for r in test if r.label == Label.MALICIOUS]
    if not pipeline.is_binary_vector():
        raise NotAttackableError(
            f"{tag} is not attackable: encoding kind {pipeline.train_encoded.kind!r} "
            "is not a binary vector"
        )
    mal_matrix = np.asarray(pipeline.encode(malicious).payload, dtype=float)

    def score_fn(matrix):
        return pipeline.decide_matrix(matrix)

    for method in methods:
        if method == "jsma":
            attack = JsmaSpec(budget=int(budget) if budget is not None else None)
            shown_budget = attack.resolve_budget(mal_matrix.shape[1])
        elif method == "ri":
            attack = RandomizedInputSpec(fraction=fraction)
            shown_budget = None
        else:
            raise ConfigError(f"unknown attack method {method!r}")
        outcome: AttackOutcome = evaluate_attack(
            score_fn, pipeline.train_encoded, mal_matrix, attack, seed=seed
        )
        apr, apr_undefined = outcome.apr()
        flags = ";".join(
            x
            for x in (
                f"repeat:{repeat}",
                "apr:0/0" if apr_undefined else "",
                f"n_total:{outcome.n_total}",
            )
            if x
        )
        result.attack_rows.append(
            AttackRow(
                approach=tag,
                attack=method,
                asr=outcome.asr,
                apr=apr,
                budget=shown_budget,
                seed=seed,
                flags=flags,
            )
        )


def _run_evolution_cell(scenario, detector, repeat, seed, records, pipe_cfg, result):
    tag = detector.approach
    o = scenario.options
    plan = EvolutionPlan(
        base_year=int(o["base_year"]),
        horizon_months=int(o.get("horizon_months", 24)),
        bucket_months=int(o.get("bucket_months", 3)),
    )
    rolls = rolling_splits(records, plan, seed=scenario.seed)
    train = split_records(records, rolls.base.train)
    val = split_records(records, rolls.base.validation)
    test_sets = [("base", split_records(records, rolls.base.test))]
    for j, bucket in enumerate(rolls.buckets, start=1):
        test_sets.append((f"bucket{j}", split_records(records, bucket)))
    _pipeline, outputs = _fit_and_score(
        tag, train, val, test_sets, pipe_cfg, seed, result, year=plan.base_year
    )
    labels_by_period = [_test_labels(recs) for _label, recs, _p in outputs]
    preds_by_period = [preds for _label, _recs, preds in outputs]
    horizons = tuple(plan.bucket_months * k for k in range(plan.n_buckets + 1))
    for metric_name in ("f1", "tpr", "fpr"):
        series = mx.evolution_series(metric_name, labels_by_period, preds_by_period)
        auts = []
        for k in range(plan.n_buckets + 1):
            if k == 0:
                auts.append(series.values[0])  # AUT(.,0) column = raw baseline
            else:
                auts.append(mx.aut_series(series, k))
        result.evolution_rows.append(
            EvolutionRow(
                approach=tag,
                repeat=repeat,
                metric=metric_name,
                horizon_months=horizons,
                auts=tuple(auts),
                series=series.values,
                missing=series.missing,
                flags=f"repeat:{repeat}",
            )
        )


# ---------------------------------------------------------------------------
# Grid execution

_WORKER_STATE: dict = {}


def _init_worker_state(records, pipe_cfg, config):
    _WORKER_STATE["records"] = records
    _WORKER_STATE["pipe_cfg"] = pipe_cfg
    _WORKER_STATE["config"] = config


def _execute_indexed(task) -> tuple[int, CellResult]:
    index, scenario, detector, repeat = task
    state = _WORKER_STATE
    result = run_cell(
        scenario,
        detector,
        repeat,
        state["records"],
        state["pipe_cfg"],
        state["config"].seed,
    )
    return index, result


def run_grid(
    config: RunnerConfig,
    records: Sequence[FeatureRecord],
    pipe_cfg: PipelineConfig,
    scenario_types: Sequence[str],
    fail_fast: bool = False,
) -> list[CellResult]:
    tasks = []
    index = 0
    for scenario in config.scenarios:
        if scenario.type not in scenario_types:
            continue
        for detector in config.detectors:
            repeats = detector.repeats or approach_def(detector.approach).repeats
            for repeat in range(repeats):
                tasks.append((index, scenario, detector, repeat))
                index += 1
    _init_worker_state(list(records), pipe_cfg, config)
    results: list[tuple[int, CellResult]] = []
    if config.jobs > 1 and len(tasks) > 1:
        import multiprocessing as mp

        with mp.get_context("fork").Pool(processes=config.jobs) as pool:
            results = pool.map(_execute_indexed, tasks)
    else:
        results = [_execute_indexed(t) for t in tasks]
    results.sort(key=lambda pair: pair[0])
    out = [r for _i, r in results]
    if fail_fast:
        for r in out:
            if r.error:
                raise RuntimeError(f"cell {r.cell} failed: {r.error}")
    return out


# ---------------------------------------------------------------------------
# Report emission


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def write_metrics_csv(rows: Sequence[MetricRow], path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["approach", "scenario", "metric", "value", "flags"])
        for row in rows:
            writer.writerow([row.approach, row.scenario, row.metric, _fmt(row.value), row.flags])


def write_attack_csv(rows: Sequence[AttackRow], path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["approach", "attack", "asr", "apr", "budget", "seed", "flags"])
        for row in rows:
            writer.writerow(
                [
                    row.approach,
                    row.attack,
                    _fmt(row.asr),
                    _fmt(row.apr),
                    "" if row.budget is None else row.budget,
                    row.seed,
                    row.flags,
                ]
            )


def write_evolution_csvs(rows: Sequence[EvolutionRow], out_dir: Path) -> list[str]:
    files = []
    by_metric: dict[str, list[EvolutionRow]] = {}
    for row in rows:
        by_metric.setdefault(row.metric, []).append(row)
    for metric_name in sorted(by_metric):
        metric_rows = by_metric[metric_name]
        horizons = metric_rows[0].horizon_months
        name = f"evolution_{metric_name}.csv"
        with (out_dir / name).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["approach", "repeat"] + [f"aut_{h}" for h in horizons] + ["flags"]
            )
            for row in metric_rows:
                writer.writerow(
                    [row.approach, row.repeat] + [_fmt(v) for v in row.auts] + [row.flags]
                )
        files.append(name)
    if rows:
        name = "evolution_series.csv"
        with (out_dir / name).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["approach", "repeat", "metric", "period_months", "value", "missing"])
            for row in rows:
                for h, v, miss in zip(row.horizon_months, row.series, row.missing):
                    writer.writerow(
                        [row.approach, row.repeat, row.metric, h, _fmt(v), int(miss)]
                    )
        files.append(name)
    return files


def write_summary_md(
    results: Sequence[CellResult], out_dir: Path, title: str
) -> None:
    lines = [f"# {title}", ""]
    metric_rows = [r for res in results for r in res.metric_rows]
    scenarios = sorted({r.scenario for r in metric_rows})
    for scenario in scenarios:
        lines.append(f"## {scenario}")
        lines.append("")
        lines.append("| approach | f1 | accuracy | tpr | fpr | flags |")
        lines.append("|---|---|---|---|---|---|")
        per_approach: dict[str, dict[str, MetricRow]] = {}
        for r in metric_rows:
            if r.scenario == scenario:
                per_approach.setdefault(r.approach, {})[r.metric] = r
        for tag in sorted(per_approach):
            cells = per_approach[tag]
            flags = ";".join(sorted({c.flags for c in cells.values() if c.flags}))
            vals = [
                _fmt(cells[m].value) if m in cells else ""
                for m in ("f1", "accuracy", "tpr", "fpr")
            ]
            lines.append("| " + " | ".join([tag] + vals + [flags]) + " |")
        lines.append("")
    attack_rows = [r for res in results for r in res.attack_rows]
    if attack_rows:
        lines.append("## adversarial attacks")
        lines.append("")
        lines.append("| approach | attack | ASR | APR | budget | flags |")
        lines.append("|---|---|---|---|---|---|")
        for r in attack_rows:
            lines.append(
                f"| {r.approach} | {r.attack} | {_fmt(r.asr)} | {_fmt(r.apr)} "
                f"| {'' if r.budget is None else r.budget} | {r.flags} |"
            )
        lines.append("")
    errors = [res for res in results if res.error]
    if errors:
        lines.append("## failed cells")
        lines.append("")
        for res in errors:
            lines.append(f"- `{res.cell}`: {res.error}")
        lines.append("")
    (out_dir / "summary.md").write_text("\n".join(lines), encoding="utf-8")


def _maybe_plots(results: Sequence[CellResult], out_dir: Path, enable: bool) -> list[str]:
    if not enable:
        return []
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return []
    files = []
    # F1 vs training-size fraction (downsample scenarios use name@fraction)
    frac_rows: dict[str, list[tuple[float, float]]] = {}
    for res in results:
        for r in res.metric_rows:
            if r.metric == "f1" and "@" in r.scenario and r.value is not None:
                frac = float(r.scenario.rsplit("@", 1)[1])
                frac_rows.setdefault(r.approach, []).append((frac, r.value))
    if frac_rows:
        fig, ax = plt.subplots(figsize=(6, 4))
        for tag, pts in sorted(frac_rows.items()):
            pts = sorted(pts)
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=tag)
        ax.set_xlabel("training-size fraction")
        ax.set_ylabel("F1")
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out_dir / "f1_vs_training_size.png", dpi=120)
        plt.close(fig)
        files.append("f1_vs_training_size.png")
    evo_rows = [r for res in results for r in res.evolution_rows if r.metric == "f1"]
    if evo_rows:
        fig, ax = plt.subplots(figsize=(6, 4))
        for row in evo_rows:
            ax.plot(row.horizon_months, row.auts, marker="o", label=f"{row.approach}#{row.repeat}")
        ax.set_xlabel("horizon (months)")
        ax.set_ylabel("AUT(F1, N)")
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out_dir / "aut_vs_horizon.png", dpi=120)
        plt.close(fig)
        files.append("aut_vs_horizon.png")
    return files


def emit_reports(
    config: RunnerConfig,
    results: Sequence[CellResult],
    out_dir: str | Path,
    title: str,
) -> int:
    """Write all report files plus the manifest; returns the exit code."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []

    metric_rows = [r for res in results for r in res.metric_rows]
    if metric_rows:
        write_metrics_csv(metric_rows, out / "metrics.csv")
        files.append("metrics.csv")
    attack_rows = [r for res in results for r in res.attack_rows]
    if attack_rows:
        write_attack_csv(attack_rows, out / "attack.csv")
        files.append("attack.csv")
    evolution_rows = [r for res in results for r in res.evolution_rows]
    if evolution_rows:
        files.extend(write_evolution_csvs(evolution_rows, out))

    timings = [t for res in results for t in res.timings]
    if timings:
        write_timings_csv(timings, out / "timings.csv")
        files.append("timings.csv")

    write_summary_md(results, out, title)
    files.append("summary.md")
    files.extend(_maybe_plots(results, out, config.plots))

    manifest = {
        "title": title,
        "seed": config.seed,
        "cells": [res.cell for res in results],
        "errors": [res.error for res in results if res.error],
        "files": sorted(files + ["manifest.json"]),
        "timer_overhead_s": round(timer_overhead(), 9),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )
    return 1 if any(res.error for res in results) else 0
