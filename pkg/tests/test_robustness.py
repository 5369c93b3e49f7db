import numpy as np
import pytest

import amdbench.models as M
from amdbench.data import KIND_DENSE, EncodedDataset
from amdbench.features import Label, validate_record
from amdbench.robustness import (
    CRYPTO_API,
    REFLECT_API,
    AttackOutcome,
    JsmaSpec,
    NotAttackableError,
    ObfuscationKind,
    RandomizedInputSpec,
    direct_sensitive_indegree,
    evaluate_attack,
    jsma_attack,
    obfuscate,
    randomized_input,
    train_substitute,
)
from amdbench.synth import SynthSpec, generate, sensitive_catalog

from conftest import graph_of, make_record


def _synth_record(seed=0, malicious=True):
    spec = SynthSpec(n_apps=40, malware_ratio=0.5, seed=seed)
    records = generate(spec)
    want = Label.MALICIOUS if malicious else Label.BENIGN
    return next(r for r in records if r.label == want), sensitive_catalog(spec)


# ---------------------------------------------------------------------------
# Obfuscation transforms


def test_rename_changes_components_keeps_rest():
    rec, catalog = _synth_record()
    out = obfuscate(rec, "rename_identifiers", seed=1)
    assert out.manifest.components != rec.manifest.components
    assert {k for k, _ in out.manifest.components} == {k for k, _ in rec.manifest.components}
    assert out.code.code_strings != rec.code.code_strings
    assert out.manifest.permissions == rec.manifest.permissions
    assert out.manifest.hardware == rec.manifest.hardware
    assert out.code.api_calls == rec.code.api_calls
    assert out.graph == rec.graph
    assert out.label == rec.label
    assert validate_record(out, catalog) == []


def test_rename_deterministic_under_seed():
    rec, _ = _synth_record()
    assert obfuscate(rec, "rename_identifiers", seed=5) == obfuscate(
        rec, "rename_identifiers", seed=5
    )


def test_encrypt_resources_contract():
    rec, catalog = _synth_record(seed=3)
    # ensure a resource-referencing string exists
    linked = sorted(rec.manifest.resources)[0]
    rec = make_record(
        app_id=rec.app_id,
        label=rec.label,
        vt=rec.vt_positives,
        permissions=rec.manifest.permissions,
        resources=rec.manifest.resources,
        strings=set(rec.code.code_strings) | {linked},
        api_calls=rec.code.api_calls,
        opcodes=rec.code.opcode_seq,
        nodes=rec.graph.nodes,
        edges=rec.graph.edges,
    )
    out = obfuscate(rec, ObfuscationKind.ENCRYPT_RESOURCES, seed=2)
    assert out.manifest.resources != rec.manifest.resources
    assert linked not in out.code.code_strings
    assert out.code.api_calls.get(CRYPTO_API, 0) == rec.code.api_calls.get(CRYPTO_API, 0) + 1
    crypto_nodes = [n for n in out.graph.nodes if n.api_name == CRYPTO_API]
    assert len(crypto_nodes) == 1
    assert out.graph.n_edges() == rec.graph.n_edges() + 1
    assert validate_record(out, catalog) == []


def test_modify_code_contract():
    rec, catalog = _synth_record(seed=4)
    n_nodes = rec.graph.n_nodes()
    out = obfuscate(rec, "modify_code", seed=2, intensity=0.5)
    expected_junk = int(np.ceil(0.5 * n_nodes))
    assert out.graph.n_nodes() == n_nodes + expected_junk
    assert out.code.api_calls == rec.code.api_calls
    assert len(out.code.opcode_seq) > len(rec.code.opcode_seq)
    assert validate_record(out, catalog) == []


def test_modify_code_splices_edges():
    g = graph_of([(0, 1)])
    rec = make_record(nodes=g.nodes, edges=g.edges, opcodes=(1, 2, 3, 4))
    out = obfuscate(rec, "modify_code", seed=0, intensity=0.5)
    junk_ids = {n.node_id for n in out.graph.nodes} - {0, 1}
    assert len(junk_ids) == 1
    junk = junk_ids.pop()
    assert (0, junk) in out.graph.edges and (junk, 1) in out.graph.edges
    assert (0, 1) not in out.graph.edges


def test_reflect_invocation_zeroes_direct_indegree():
    g = graph_of(
        [(0, 2), (1, 2)], sensitive={2}, api_names={2: "android.sens.Api000.invoke"}
    )
    rec = make_record(nodes=g.nodes, edges=g.edges)
    assert direct_sensitive_indegree(rec.graph) == 2
    out = obfuscate(rec, "reflect_invocation", seed=1, intensity=1.0)
    assert direct_sensitive_indegree(out.graph) == 0
    assert "android.sens.Api000.invoke" in out.code.code_strings
    reflect_nodes = [n for n in out.graph.nodes if n.api_name == REFLECT_API]
    assert len(reflect_nodes) == 1
    assert not reflect_nodes[0].sensitive
    # the sensitive node itself is kept
    assert any(n.sensitive for n in out.graph.nodes)


def test_reflect_partial_intensity():
    g = graph_of(
        [(0, 3), (1, 3), (2, 3), (4, 3)],
        sensitive={3},
        api_names={3: "android.sens.Api000.invoke"},
    )
    rec = make_record(nodes=g.nodes, edges=g.edges)
    out = obfuscate(rec, "reflect_invocation", seed=1, intensity=0.5)
    assert direct_sensitive_indegree(out.graph) == 2  # ceil(0.5 * 4) rerouted


def test_obfuscate_rejects_unknown_kind_and_intensity():
    rec, _ = _synth_record()
    with pytest.raises(ValueError):
        obfuscate(rec, "scramble_everything")
    with pytest.raises(ValueError):
        obfuscate(rec, "modify_code", intensity=0.0)


def test_obfuscation_preserves_validity_and_label_all_kinds():
    spec = SynthSpec(n_apps=30, malware_ratio=0.3, seed=8)
    records = generate(spec)
    catalog = sensitive_catalog(spec)
    for kind in ObfuscationKind:
        for rec in records[:10]:
            out = obfuscate(rec, kind, seed=11, intensity=1.0)
            assert out.label == rec.label
            assert validate_record(out, catalog) == []


# ---------------------------------------------------------------------------
# Substitute model


def _dense(x, y):
    return EncodedDataset(
        kind=KIND_DENSE,
        payload=np.asarray(x, dtype=float),
        row_ids=tuple(f"r{i}" for i in range(len(x))),
        labels=np.asarray(y, dtype=np.int64),
        meta={"binary": True},
    )


def _separable_binary(rng, n=80, d=20):
    x = (rng.random((n, d)) < 0.3).astype(float)
    y = np.zeros(n, dtype=int)
    y[: n // 2] = 1
    x[: n // 2, :3] = 1.0  # malicious always carry features 0..2
    x[n // 2 :, :3] = 0.0
    return x, y


def test_substitute_separable_accuracy(rng):
    x, y = _separable_binary(rng)
    sub = train_substitute(_dense(x, y), seed=0)
    preds = (sub.logit_of(x) > 0).astype(int)
    assert np.mean(preds == y) >= 0.95


def test_substitute_rejects_empty_and_nonbinary(rng):
    with pytest.raises(ValueError):
        train_substitute(_dense(np.zeros((0, 4)), np.zeros(0, dtype=int)), seed=0)
    with pytest.raises(NotAttackableError):
        train_substitute(_dense(rng.random((10, 4)), np.array([0, 1] * 5)), seed=0)


def test_substitute_deterministic(rng):
    x, y = _separable_binary(rng)
    s1 = train_substitute(_dense(x, y), seed=4)
    s2 = train_substitute(_dense(x, y), seed=4)
    for key in s1.params:
        assert np.array_equal(s1.params[key], s2.params[key])


# ---------------------------------------------------------------------------
# JSMA on a hand-built linear substitute


def _linear_substitute(w, shift=10.0):
    """SubstituteMLP computing exactly logit = w . x on small binary inputs."""
    sub = M.SubstituteMLP(M.SubstituteMLPSpec(hidden=2))
    d = len(w)
    sub.input_dim = d
    from amdbench.models.nncore import MLPBlock

    sub.mlp = MLPBlock("mlp", [d, 2, 1], np.random.default_rng(0), sub.params)
    sub.params["mlp.W0"][...] = np.stack([np.asarray(w, dtype=float),
                                          np.zeros(d)], axis=1)
    sub.params["mlp.b0"][...] = np.array([shift, shift])
    sub.params["mlp.W1"][...] = np.array([[1.0], [-1.0]])
    sub.params["mlp.b1"][...] = 0.0
    sub._dims = {"input_dim": d}
    return sub


def test_jsma_hand_example():
    sub = _linear_substitute([-2.0, 1.0, 0.5])
    x = np.array([0.0, 1.0, 1.0])
    assert sub.logit_of(x) == pytest.approx(1.5)
    adv, flips = jsma_attack(sub, x, budget=10)
    assert flips == 1
    assert list(adv) == [1.0, 1.0, 1.0]
    assert sub.logit_of(adv) == pytest.approx(-0.5)


def test_jsma_already_benign_untouched():
    sub = _linear_substitute([-2.0, 1.0, 0.5])
    x = np.array([0.0, 0.0, 0.0])
    adv, flips = jsma_attack(sub, x, budget=10)
    assert flips == 0
    assert np.array_equal(adv, x)


def test_jsma_all_positive_weights_exhausts_budget():
    sub = _linear_substitute([1.0, 2.0, 0.5, 0.3])
    x = np.array([0.0, 1.0, 0.0, 0.0])
    adv, flips = jsma_attack(sub, x, budget=3)
    assert flips == 3
    assert sub.logit_of(adv) > 0  # still malicious


def test_jsma_rejects_bad_budget():
    sub = _linear_substitute([1.0])
    with pytest.raises(ValueError):
        jsma_attack(sub, np.array([0.0]), budget=0)


def test_jsma_addition_only():
    sub = _linear_substitute([-1.0, -0.5, 2.0, 1.0])
    x = np.array([0.0, 0.0, 1.0, 1.0])
    adv, _flips = jsma_attack(sub, x, budget=4)
    assert np.all(adv >= x)


# ---------------------------------------------------------------------------
# Randomized input


def test_randomized_input_covers_all_zeros():
    x = np.array([0.0, 1.0, 0.0, 0.0])
    adv = randomized_input(x, fraction=1.0, seed=0)
    assert list(adv) == [1.0, 1.0, 1.0, 1.0]


def test_randomized_input_all_ones_unchanged():
    x = np.ones(5)
    assert np.array_equal(randomized_input(x, 0.5, seed=1), x)


def test_randomized_input_deterministic():
    x = np.zeros(40)
    a = randomized_input(x, 0.1, seed=3)
    b = randomized_input(x, 0.1, seed=3)
    assert np.array_equal(a, b)
    assert a.sum() == 4  # ceil(0.1 * 40)


def test_randomized_input_rejects_fraction():
    with pytest.raises(ValueError):
        randomized_input(np.zeros(3), 0.0)


# ---------------------------------------------------------------------------
# Attack accounting


def test_attack_outcome_arithmetic():
    outcome = AttackOutcome(n_total=100, n_success=50, flips_per_success=(1,) * 50,
                            features_total=300)
    assert outcome.asr == 0.5
    one = AttackOutcome(n_total=10, n_success=1, flips_per_success=(3,), features_total=300)
    apr, undefined = one.apr()
    assert apr == pytest.approx(0.01)
    assert not undefined


def test_attack_outcome_no_success_flagged():
    outcome = AttackOutcome(n_total=5, n_success=0, flips_per_success=(), features_total=10)
    assert outcome.asr == 0.0
    apr, undefined = outcome.apr()
    assert apr == 0.0 and undefined


def test_evaluate_attack_end_to_end(rng):
    x, y = _separable_binary(rng, n=100, d=30)
    train = _dense(x, y)
    model = M.fit(M.build_model(M.LinearSVMSpec()), train, None, M.TrainConfig(seed=0))

    def score_fn(matrix):
        ds = _dense(matrix, np.zeros(len(matrix), dtype=int))
        return M.predict_labels(model, ds).astype(bool)

    malicious = x[y == 1]
    outcome = evaluate_attack(score_fn, train, malicious, JsmaSpec(budget=25), seed=1)
    assert outcome.n_total == int(score_fn(malicious).sum())
    assert outcome.n_removals == 0
    assert all(f <= 25 for f in outcome.flips_per_success)
    ri = evaluate_attack(score_fn, train, malicious, RandomizedInputSpec(0.05), seed=1)
    assert 0.0 <= ri.asr <= 1.0
