import csv
import hashlib
import json
from pathlib import Path

import pytest

from amdbench.cli import main

SYNTH_TOML = """
[synth]
n_apps = 300
malware_ratio = 0.1
year_start = 2011
year_end = 2013
drift_strength = 0.0
seed = 42
"""

BASE_CONFIG = """
seed = 7
jobs = 1

[corpus.synth]
n_apps = 300
malware_ratio = 0.1
year_start = 2011
year_end = 2013
seed = 42

[pipeline]
max_epochs = 4
patience = 2

[[detectors]]
approach = "drebin"

[[detectors]]
approach = "malscan"

[[scenarios]]
name = "base"
type = "ratio"
seed = 11
train_benign = 135
train_malicious = 15
val_benign = 27
val_malicious = 3
test_benign = 54
test_malicious = 6
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_cli_synth_and_validate(tmp_path):
    cfg = _write(tmp_path, "synth.toml", SYNTH_TOML)
    out = tmp_path / "corpus"
    assert main(["synth", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "features.jsonl").exists()
    assert (out / "sensitive_apis.txt").exists()
    assert (out / "signal_schedule.txt").exists()
    assert main(["validate", str(out / "features.jsonl")]) == 0


def test_cli_validate_reports_violations(tmp_path):
    cfg = _write(tmp_path, "synth.toml", SYNTH_TOML)
    out = tmp_path / "corpus"
    main(["synth", "--config", cfg, "--out", str(out)])
    corpus = out / "features.jsonl"
    lines = corpus.read_text().splitlines()
    # corrupt one record's month
    obj = json.loads(lines[0])
    obj["month"] = 99
    lines[0] = json.dumps(obj)
    corpus.write_text("\n".join(lines) + "\n")
    assert main(["validate", str(corpus)]) == 1


def test_cli_run_produces_reports(tmp_path):
    cfg = _write(tmp_path, "run.toml", BASE_CONFIG)
    out = tmp_path / "rep"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    rows = _read_csv(out / "metrics.csv")
    assert rows[0] == ["approach", "scenario", "metric", "value", "flags"]
    approaches = {r[0] for r in rows[1:]}
    assert approaches == {"drebin", "malscan"}
    assert (out / "summary.md").exists()
    assert (out / "timings.csv").exists()


def test_manifest_closure(tmp_path):
    cfg = _write(tmp_path, "run.toml", BASE_CONFIG)
    out = tmp_path / "rep"
    main(["run", "--config", cfg, "--out", str(out)])
    manifest = json.loads((out / "manifest.json").read_text())
    listed = set(manifest["files"])
    on_disk = {p.name for p in out.iterdir()}
    assert listed == on_disk  # every file listed; every listed file exists
    assert all((out / name).exists() for name in listed)
    # every cell is traceable to a (detector, scenario, seed) triple
    for cell in manifest["cells"]:
        assert {"approach", "scenario", "repeat", "seed"} <= set(cell)


def test_rerun_byte_identical(tmp_path):
    cfg = _write(tmp_path, "run.toml", BASE_CONFIG)
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["run", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["run", "--config", cfg, "--out", str(out2)]) == 0
    # timings.csv carries wall-clock measurements and is excluded
    for name in ("metrics.csv", "summary.md"):
        assert _hash(out1 / name) == _hash(out2 / name), name


def test_seed_isolation_between_blocks(tmp_path):
    two_blocks = BASE_CONFIG + """
[[scenarios]]
name = "second"
type = "ratio"
seed = 77
train_benign = 90
train_malicious = 10
val_benign = 18
val_malicious = 2
test_benign = 36
test_malicious = 4
"""
    changed = two_blocks.replace("seed = 77", "seed = 78")
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    main(["run", "--config", _write(tmp_path, "a.toml", two_blocks), "--out", str(out1)])
    main(["run", "--config", _write(tmp_path, "b.toml", changed), "--out", str(out2)])
    rows1 = [r for r in _read_csv(out1 / "metrics.csv") if r[1] == "base"]
    rows2 = [r for r in _read_csv(out2 / "metrics.csv") if r[1] == "base"]
    assert rows1 == rows2  # untouched block is bit-identical
    second1 = [r for r in _read_csv(out1 / "metrics.csv") if r[1] == "second"]
    second2 = [r for r in _read_csv(out2 / "metrics.csv") if r[1] == "second"]
    assert second1 != second2  # changed block differs


def test_unknown_approach_exit_2(tmp_path):
    bad = BASE_CONFIG.replace('approach = "malscan"', 'approach = "drebin2"')
    cfg = _write(tmp_path, "bad.toml", bad)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "x")]) == 2


def test_missing_config_exit_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.toml")]) == 2


def test_config_without_scenarios_exit_2(tmp_path):
    broken = BASE_CONFIG.split("[[scenarios]]")[0]
    cfg = _write(tmp_path, "broken.toml", broken)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "x")]) == 2


def test_unsatisfiable_scenario_recorded_as_failure(tmp_path):
    greedy = BASE_CONFIG.replace("train_benign = 135", "train_benign = 100000")
    cfg = _write(tmp_path, "greedy.toml", greedy)
    out = tmp_path / "rep"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 1
    rows = _read_csv(out / "metrics.csv")
    assert any("error:ScenarioError" in r[4] for r in rows[1:])


def test_downsample_and_ablation_blocks(tmp_path):
    cfg_text = BASE_CONFIG + """
[[scenarios]]
name = "size"
type = "downsample"
seed = 21
fractions = [1.0, 0.5]
train_benign = 90
train_malicious = 10
val_benign = 18
val_malicious = 2
test_benign = 36
test_malicious = 4

[[scenarios]]
name = "ablate"
type = "ablation"
seed = 22
removed = [["permission"]]
train_benign = 90
train_malicious = 10
val_benign = 18
val_malicious = 2
test_benign = 36
test_malicious = 4
"""
    cfg = _write(tmp_path, "run.toml", cfg_text)
    out = tmp_path / "rep"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    scenarios = {r[1] for r in _read_csv(out / "metrics.csv")[1:]}
    assert {"size@1", "size@0.5", "ablate:original", "ablate:w/o permission"} <= scenarios


def test_obfuscation_block(tmp_path):
    cfg_text = BASE_CONFIG + """
[[scenarios]]
name = "obf"
type = "obfuscation"
seed = 31
kinds = ["rename_identifiers"]
intensity = 1.0
train_benign = 90
train_malicious = 10
val_benign = 18
val_malicious = 2
test_benign = 36
test_malicious = 4
"""
    cfg = _write(tmp_path, "run.toml", cfg_text)
    out = tmp_path / "rep"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    scenarios = {r[1] for r in _read_csv(out / "metrics.csv")[1:]}
    assert {"obf:none", "obf:rename_identifiers"} <= scenarios


def test_attack_command(tmp_path):
    cfg_text = BASE_CONFIG + """
[[scenarios]]
name = "adv"
type = "attack"
seed = 41
methods = ["jsma", "ri"]
budget = 25
fraction = 0.05
train_benign = 90
train_malicious = 10
val_benign = 18
val_malicious = 2
test_benign = 36
test_malicious = 4
"""
    # malscan is not a binary-vector encoding -> recorded as not attackable
    cfg = _write(tmp_path, "atk.toml", cfg_text)
    out = tmp_path / "rep"
    code = main(["attack", "--config", cfg, "--out", str(out)])
    assert code == 1  # malscan cell fails with NotAttackableError
    rows = _read_csv(out / "attack.csv")
    assert rows[0] == ["approach", "attack", "asr", "apr", "budget", "seed", "flags"]
    drebin_rows = [r for r in rows[1:] if r[0] == "drebin"]
    assert {r[1] for r in drebin_rows} == {"jsma", "ri"}
    manifest = json.loads((out / "manifest.json").read_text())
    assert any("NotAttackableError" in e for e in manifest["errors"])


def test_evolve_command(tmp_path):
    cfg_text = """
seed = 7
jobs = 1

[corpus.synth]
n_apps = 900
malware_ratio = 0.1
year_start = 2011
year_end = 2013
drift_strength = 0.5
seed = 42

[pipeline]
max_epochs = 4
patience = 2

[[detectors]]
approach = "drebin"

[[scenarios]]
name = "evo"
type = "evolution"
seed = 51
base_year = 2011
horizon_months = 12
bucket_months = 3
"""
    cfg = _write(tmp_path, "evo.toml", cfg_text)
    out = tmp_path / "rep"
    assert main(["evolve", "--config", cfg, "--out", str(out)]) == 0
    rows = _read_csv(out / "evolution_f1.csv")
    assert rows[0][:6] == ["approach", "repeat", "aut_0", "aut_3", "aut_6", "aut_9"]
    assert (out / "evolution_series.csv").exists()
    assert (out / "evolution_tpr.csv").exists()
    assert (out / "evolution_fpr.csv").exists()


def test_all_twelve_approaches_grid(tmp_path):
    detectors = "\n".join(
        f'[[detectors]]\napproach = "{tag}"\n'
        for tag in (
            "drebin", "mamadroid", "mclaughlin", "hindroid", "deeprefiner", "kim",
            "malscan", "sdac", "homdroid", "xmal", "ramda", "msdroid",
        )
    )
    cfg_text = f"""
seed = 7
jobs = 1

[corpus.synth]
n_apps = 240
malware_ratio = 0.1
year_start = 2011
year_end = 2012
seed = 42

[pipeline]
max_epochs = 2
patience = 1
deeprefiner_maxlen = 256
mclaughlin_maxlen = 256
multimodal_max_ngrams = 256

{detectors}

[[scenarios]]
name = "grid"
type = "ratio"
seed = 13
train_benign = 108
train_malicious = 12
val_benign = 18
val_malicious = 2
test_benign = 54
test_malicious = 6
"""
    cfg = _write(tmp_path, "grid.toml", cfg_text)
    out = tmp_path / "rep"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    rows = _read_csv(out / "metrics.csv")
    f1_rows = [r for r in rows[1:] if r[2] == "f1" and "error" not in r[4]]
    approaches = {r[0] for r in f1_rows}
    assert len(approaches) == 12  # 12-row F1 table for the scenario
