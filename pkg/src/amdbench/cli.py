"""Command-line entry points: synth, validate, run, attack, evolve.

Exit codes: 0 ok, 1 one or more sub-runs failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import ScenarioError
from .features import (
    DEFAULT_OPCODE_VOCAB_SIZE,
    read_records,
    validate_corpus,
    validate_record,
    write_records,
)
from .pipelines import UnknownApproachError
from .runner import (
    ConfigError,
    RunnerConfig,
    build_pipeline_config,
    emit_reports,
    load_config,
    load_corpus,
    run_grid,
)
from .synth import SynthSpec, describe_signal, generate, sensitive_catalog

EXIT_OK = 0
EXIT_RUN_FAILURES = 1
EXIT_CONFIG_ERROR = 2


def _read_synth_spec(path: str) -> SynthSpec:
    if sys.version_info >= (3, 11):  # pragma: no cover
        import tomllib
    else:
        import tomli as tomllib
    try:
        with Path(path).open("rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"spec file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"synth spec does not parse: {exc}")
    table = raw.get("synth", raw)
    try:
        return SynthSpec(**{
            k: tuple(v) if isinstance(v, list) else v for k, v in table.items()
        })
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad synth spec: {exc}")


def cmd_synth(args) -> int:
    spec = _read_synth_spec(args.config)
    if args.seed is not None:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
    records = generate(spec)
    out = Path(args.out or "corpus")
    out.mkdir(parents=True, exist_ok=True)
    corpus_path = out / "features.jsonl"
    catalog_path = out / "sensitive_apis.txt"
    write_records(records, corpus_path)
    sensitive_catalog(spec).to_file(catalog_path)
    (out / "signal_schedule.txt").write_text(describe_signal(spec) + "\n", encoding="utf-8")
    print(f"wrote {len(records)} records to {corpus_path}")
    print(f"wrote catalog to {catalog_path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    corpus_path = Path(args.corpus)
    records = read_records(corpus_path)
    catalog_path = args.catalog or corpus_path.with_name("sensitive_apis.txt")
    from .features import SensitiveApiCatalog

    catalog = SensitiveApiCatalog.from_file(catalog_path)
    violations: list[str] = validate_corpus(records)
    n_bad = 0
    for record in records:
        issues = validate_record(record, catalog, args.opcode_vocab)
        if issues:
            n_bad += 1
            violations.extend(f"{record.app_id}: {v}" for v in issues)
    print(f"records: {len(records)}")
    print(f"records with violations: {n_bad}")
    for v in violations[:50]:
        print(f"  {v}")
    if len(violations) > 50:
        print(f"  ... and {len(violations) - 50} more")
    return EXIT_OK if not violations else EXIT_RUN_FAILURES


def _grid_command(args, scenario_types: tuple[str, ...], title: str) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.jobs is not None:
        config.jobs = args.jobs
    out_dir = args.out or config.out
    records, catalog = load_corpus(config)
    pipe_cfg = build_pipeline_config(config, catalog)
    results = run_grid(
        config, records, pipe_cfg, scenario_types, fail_fast=args.fail_fast
    )
    if not results:
        raise ConfigError(
            f"config contains no scenarios of type {', '.join(scenario_types)}"
        )
    return emit_reports(config, results, out_dir, title)


def cmd_run(args) -> int:
    return _grid_command(
        args, ("ratio", "downsample", "ablation", "obfuscation"), "effectiveness report"
    )


def cmd_attack(args) -> int:
    return _grid_command(args, ("attack",), "adversarial attack report")


def cmd_evolve(args) -> int:
    return _grid_command(args, ("evolution",), "evolution report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amdbench",
        description="Desk-scale benchmark harness for ML-based Android malware detectors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus")
    p_synth.add_argument("--config", required=True, help="TOML file with a [synth] table")
    p_synth.add_argument("--out", default=None, help="output directory (default: corpus)")
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.set_defaults(func=cmd_synth)

    p_val = sub.add_parser("validate", help="validate a corpus file")
    p_val.add_argument("corpus", help="features.jsonl path")
    p_val.add_argument("--catalog", default=None, help="sensitive_apis.txt path")
    p_val.add_argument("--opcode-vocab", type=int, default=DEFAULT_OPCODE_VOCAB_SIZE)
    p_val.set_defaults(func=cmd_validate)

    for name, fn, help_text in (
        ("run", cmd_run, "run ratio/downsample/ablation/obfuscation scenarios"),
        ("attack", cmd_attack, "run adversarial attack scenarios"),
        ("evolve", cmd_evolve, "run rolling evolution scenarios"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--fail-fast", action="store_true")
        p.set_defaults(func=fn)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnknownApproachError, ScenarioError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except RuntimeError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURES


if __name__ == "__main__":
    sys.exit(main())
