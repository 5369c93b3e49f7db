"""Deterministic synthetic corpus with a planted malicious signal and a drift knob.

Signal model
------------
Malicious records carry a rotating signature: a subset of permissions, a set
of sensitive APIs wired into the call graph, code strings, and opcode 3-grams.
Benign records draw from the same background pools, carry a stable
"goodware profile" (common permissions/APIs/strings), and overlap the
signature only at a small ambient rate.  A small fraction of benign records
("spoofs") are generated from the malicious profile, which gives every
detector an irreducible false-positive floor.

Drift rotates signature features at month granularity; the per-month rate is
calibrated so the probability that a feature rotates at least once within a
year equals ``drift_strength``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .features import (
    EXTERNAL_API,
    INTERNAL,
    CodeFeatures,
    FeatureRecord,
    GraphNode,
    Label,
    ManifestFeatures,
    ProgramGraph,
    SensitiveApiCatalog,
)

_COMPONENT_KINDS = ("activity", "service", "receiver", "provider")

# families cycled through for background (non-sensitive) API names
_BG_API_TEMPLATES = (
    "java.util.Collections.list{i}",
    "android.view.View.render{i}",
    "com.example.app{i}.Main.run",
    "com.google.common.Util{i}.apply",
    "org.apache.http.Client{i}.get",
    "javax.net.ssl.Session{i}.open",
    "org.json.JSONObject.opt{i}",
)


@dataclass(frozen=True)
class SynthSpec:
    n_apps: int
    malware_ratio: float
    year_start: int = 2011
    year_end: int = 2020
    drift_strength: float = 0.0
    seed: int = 0
    # pool sizes
    n_permissions: int = 120
    n_apis: int = 160
    n_sensitive: int = 30
    n_strings: int = 160
    n_hardware: int = 24
    n_intents: int = 48
    n_components_pool: int = 60
    n_resources: int = 80
    # signature knobs
    signature_permissions: int = 12
    signature_apis: int = 6
    signature_strings: int = 6
    signature_ngrams: int = 4
    signature_strength: float = 0.6
    ambient_overlap: float = 0.04
    spoof_rate: float = 0.04
    benign_profile_size: int = 10
    # per-record shape knobs
    graph_size_range: tuple[int, int] = (12, 36)
    opcode_len_range: tuple[int, int] = (48, 192)
    opcode_vocab: int = 256

    def __post_init__(self):
        if self.n_apps < 1:
            raise ValueError("n_apps must be >= 1")
        if not 0 < self.malware_ratio < 1:
            raise ValueError("malware_ratio must be in (0, 1)")
        if self.year_end < self.year_start:
            raise ValueError("empty year range")
        if self.drift_strength < 0 or self.drift_strength > 1:
            raise ValueError("drift_strength must be in [0, 1]")
        if self.n_sensitive > self.n_apis:
            raise ValueError("n_sensitive exceeds n_apis")
        if self.signature_apis > self.n_sensitive:
            raise ValueError("signature_apis exceeds n_sensitive")
        if self.signature_permissions > self.n_permissions - self.benign_profile_size:
            raise ValueError("signature_permissions exceeds available permission pool")
        if self.signature_strings > self.n_strings - self.benign_profile_size:
            raise ValueError("signature_strings exceeds available string pool")
        for lo, hi in (self.graph_size_range, self.opcode_len_range):
            if lo < 1 or hi < lo:
                raise ValueError("invalid range knob")

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(range(self.year_start, self.year_end + 1))

    @property
    def n_malicious(self) -> int:
        return round(self.n_apps * self.malware_ratio)


@dataclass(frozen=True)
class SignalSnapshot:
    permissions: tuple[str, ...]
    apis: tuple[str, ...]
    strings: tuple[str, ...]
    opcode_ngrams: tuple[tuple[int, ...], ...]

    def all_features(self) -> set:
        return set(self.permissions) | set(self.apis) | set(self.strings) | set(self.opcode_ngrams)


@dataclass(frozen=True)
class FeaturePools:
    permissions: tuple[str, ...]
    benign_permissions: tuple[str, ...]
    sensitive_apis: tuple[str, ...]
    background_apis: tuple[str, ...]
    benign_apis: tuple[str, ...]
    strings: tuple[str, ...]
    benign_strings: tuple[str, ...]
    hardware: tuple[str, ...]
    intents: tuple[str, ...]
    benign_intents: tuple[str, ...]
    component_names: tuple[str, ...]
    resources: tuple[str, ...]


def build_pools(spec: SynthSpec) -> FeaturePools:
    perms = tuple(f"android.permission.P{i:03d}" for i in range(spec.n_permissions))
    sens = tuple(f"android.sens.Api{i:03d}.invoke" for i in range(spec.n_sensitive))
    n_bg = spec.n_apis - spec.n_sensitive
    bg = tuple(
        _BG_API_TEMPLATES[i % len(_BG_API_TEMPLATES)].format(i=i) for i in range(n_bg)
    )
    strings = tuple(f"https://svc{i:03d}.example.com/api" for i in range(spec.n_strings))
    hw = tuple(f"android.hardware.hw_{i:02d}" for i in range(spec.n_hardware))
    intents = tuple(f"android.intent.action.ACT_{i:02d}" for i in range(spec.n_intents))
    comps = tuple(f"CommonComponent{i:02d}" for i in range(spec.n_components_pool))
    res = tuple(f"res/drawable/asset_{i:03d}.png" for i in range(spec.n_resources))
    b = spec.benign_profile_size
    return FeaturePools(
        permissions=perms,
        benign_permissions=perms[:b],
        sensitive_apis=sens,
        background_apis=bg,
        benign_apis=bg[: min(b, len(bg))],
        strings=strings,
        benign_strings=strings[:b],
        hardware=hw,
        intents=intents,
        benign_intents=intents[: min(b, len(intents))],
        component_names=comps,
        resources=res,
    )


def sensitive_catalog(spec: SynthSpec) -> SensitiveApiCatalog:
    return SensitiveApiCatalog(names=build_pools(spec).sensitive_apis, version="synth")


# ---------------------------------------------------------------------------
# Signature schedule


def _monthly_rotation_prob(drift_strength: float) -> float:
    if drift_strength >= 1.0:
        return 1.0
    # yearly P(rotated at least once) == drift_strength
    return 1.0 - (1.0 - drift_strength) ** (1.0 / 12.0)


def signal_schedule(spec: SynthSpec) -> dict[tuple[int, int], SignalSnapshot]:
    """Signature snapshot per (year, month), deterministic from the spec."""
    pools = build_pools(spec)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x51]))
    sig_perm_pool = [p for p in pools.permissions if p not in pools.benign_permissions]
    sig_str_pool = [s for s in pools.strings if s not in pools.benign_strings]

    def fresh_ngram() -> tuple[int, ...]:
        return tuple(int(v) for v in rng.integers(0, spec.opcode_vocab, size=3))

    perms = list(rng.choice(sig_perm_pool, size=spec.signature_permissions, replace=False))
    apis = list(rng.choice(pools.sensitive_apis, size=spec.signature_apis, replace=False))
    strings = list(rng.choice(sig_str_pool, size=spec.signature_strings, replace=False))
    ngrams = [fresh_ngram() for _ in range(spec.signature_ngrams)]

    p_rot = _monthly_rotation_prob(spec.drift_strength)
    schedule: dict[tuple[int, int], SignalSnapshot] = {}

    def rotate(current: list, pool, is_ngram=False) -> list:
        out = list(current)
        for i in range(len(out)):
            if rng.random() < p_rot:
                if is_ngram:
                    out[i] = fresh_ngram()
                else:
                    options = [x for x in pool if x not in out]
                    if options:
                        out[i] = options[int(rng.integers(len(options)))]
        return out

    first = True
    for year in spec.years:
        for month in range(1, 13):
            if not first:
                perms = rotate(perms, sig_perm_pool)
                apis = rotate(apis, pools.sensitive_apis)
                strings = rotate(strings, sig_str_pool)
                ngrams = rotate(ngrams, None, is_ngram=True)
            first = False
            schedule[(year, month)] = SignalSnapshot(
                permissions=tuple(perms),
                apis=tuple(apis),
                strings=tuple(strings),
                opcode_ngrams=tuple(ngrams),
            )
    return schedule


def describe_signal(spec: SynthSpec) -> str:
    """Human-readable signature schedule, one line per year plus change lines."""
    schedule = signal_schedule(spec)
    lines = []
    prev: SignalSnapshot | None = None
    for year in spec.years:
        start = schedule[(year, 1)]
        lines.append(
            f"{year}: perms={list(start.permissions)} apis={list(start.apis)} "
            f"strings={list(start.strings)} ngrams={list(start.opcode_ngrams)}"
        )
        prev = start
        for month in range(2, 13):
            snap = schedule[(year, month)]
            if snap != prev:
                lines.append(f"  {year}-{month:02d}: rotated to perms={list(snap.permissions)}")
            prev = snap
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Record generation


def _choose(rng: np.random.Generator, pool, count: int) -> list:
    count = min(count, len(pool))
    if count <= 0:
        return []
    idx = rng.choice(len(pool), size=count, replace=False)
    return [pool[int(i)] for i in idx]


def _bernoulli_subset(rng: np.random.Generator, items, p: float) -> list:
    return [x for x in items if rng.random() < p]


def _make_graph(
    rng: np.random.Generator,
    spec: SynthSpec,
    api_nodes: list[tuple[str, int, bool]],  # (api_name, in_degree, sensitive)
) -> ProgramGraph:
    lo, hi = spec.graph_size_range
    n_internal = int(rng.integers(lo, hi + 1))
    nodes = [GraphNode(i, INTERNAL) for i in range(n_internal)]
    edges: set[tuple[int, int]] = set()
    for i in range(1, n_internal):
        edges.add((int(rng.integers(0, i)), i))  # random tree
    for _ in range(max(1, n_internal // 2)):
        a, b = int(rng.integers(n_internal)), int(rng.integers(n_internal))
        if a != b:
            edges.add((a, b))
    next_id = n_internal
    for api_name, in_degree, sensitive in api_nodes:
        node = GraphNode(next_id, EXTERNAL_API, api_name=api_name, sensitive=sensitive)
        nodes.append(node)
        callers = rng.choice(n_internal, size=min(in_degree, n_internal), replace=False)
        for c in callers:
            edges.add((int(c), next_id))
        next_id += 1
    return ProgramGraph(nodes=tuple(nodes), edges=tuple(sorted(edges)))


def _gen_record(
    rng: np.random.Generator,
    spec: SynthSpec,
    pools: FeaturePools,
    catalog_set: frozenset,
    snapshot: SignalSnapshot,
    app_id: str,
    year: int,
    month: int,
    malicious_profile: bool,
    label: Label,
) -> FeatureRecord:
    q = spec.signature_strength
    ambient = spec.ambient_overlap
    benign_rate = 0.05 if malicious_profile else 0.55
    sig_rate = q if malicious_profile else ambient

    sig_perms = set(snapshot.permissions)
    background_perm_pool = [p for p in pools.permissions if p not in sig_perms]
    perms = set(_choose(rng, background_perm_pool, int(rng.integers(4, 13))))
    perms |= set(_bernoulli_subset(rng, snapshot.permissions, sig_rate))
    perms |= set(_bernoulli_subset(rng, pools.benign_permissions, benign_rate))

    api_calls: dict[str, int] = {}
    bg_apis = _choose(rng, pools.background_apis, int(rng.integers(6, 15)))
    for api in bg_apis:
        api_calls[api] = int(rng.integers(1, 9))
    for api in _bernoulli_subset(rng, pools.benign_apis, benign_rate):
        api_calls[api] = api_calls.get(api, 0) + int(rng.integers(1, 5))
    sig_apis = _bernoulli_subset(rng, snapshot.apis, sig_rate)
    for api in sig_apis:
        api_calls[api] = int(rng.integers(1, 5))

    # graph: externalize the signature sensitive APIs (fan-in 2-3), maybe one
    # ambient sensitive API, and a few background APIs
    api_nodes: list[tuple[str, int, bool]] = []
    for api in sig_apis:
        api_nodes.append((api, int(rng.integers(2, 4)), True))
    if rng.random() < 0.15:
        others = [a for a in pools.sensitive_apis if a not in sig_apis]
        if others:
            api = others[int(rng.integers(len(others)))]
            api_calls[api] = api_calls.get(api, 0) + 1
            api_nodes.append((api, 1, True))
    for api in _choose(rng, bg_apis, min(len(bg_apis), int(rng.integers(2, 7)))):
        api_nodes.append((api, 1, False))
    graph = _make_graph(rng, spec, api_nodes)

    lo, hi = spec.opcode_len_range
    length = int(rng.integers(lo, hi + 1))
    opcodes = rng.integers(0, spec.opcode_vocab, size=length).tolist()
    for gram in snapshot.opcode_ngrams:
        if rng.random() < sig_rate:
            for _ in range(int(rng.integers(2, 4))):
                pos = int(rng.integers(0, max(1, length - len(gram))))
                opcodes[pos : pos + len(gram)] = list(gram)

    resources = set(_choose(rng, pools.resources, int(rng.integers(2, 9))))
    strings = set(_choose(rng, pools.strings, int(rng.integers(3, 11))))
    strings |= set(_bernoulli_subset(rng, snapshot.strings, sig_rate))
    strings |= set(_bernoulli_subset(rng, pools.benign_strings, benign_rate))
    if resources and rng.random() < 0.5:
        linked = list(resources)[int(rng.integers(len(resources)))]
        strings.add(linked)  # resource-referencing string (encrypt_resources target)

    hardware = set(_choose(rng, pools.hardware, int(rng.integers(1, 6))))
    intents = set(_choose(rng, pools.intents, int(rng.integers(2, 8))))
    intents |= set(_bernoulli_subset(rng, pools.benign_intents, benign_rate))

    n_comps = int(rng.integers(2, 6))
    components = set()
    for j in range(n_comps):
        kind = _COMPONENT_KINDS[int(rng.integers(4))]
        if rng.random() < 0.5:
            name = pools.component_names[int(rng.integers(len(pools.component_names)))]
        else:
            name = f"Cmp_{app_id}_{j}"
        components.add((kind, name))

    size_mb = float(2.0 * (1.15 ** (year - spec.year_start)) * rng.lognormal(0.0, 0.3))
    vt = int(rng.integers(4, 41)) if label == Label.MALICIOUS else 0
    return FeatureRecord(
        app_id=app_id,
        label=label,
        vt_positives=vt,
        year=year,
        month=month,
        size_mb=round(size_mb, 3),
        manifest=ManifestFeatures(
            hardware=frozenset(hardware),
            components=frozenset(components),
            intents=frozenset(intents),
            permissions=frozenset(perms),
            resources=frozenset(resources),
        ),
        code=CodeFeatures(
            api_calls=api_calls,
            opcode_seq=tuple(int(o) % spec.opcode_vocab for o in opcodes),
            code_strings=frozenset(strings),
        ),
        graph=graph,
    )


def generate(spec: SynthSpec) -> list[FeatureRecord]:
    """Generate the corpus: exact malicious count, balanced years, seeded."""
    pools = build_pools(spec)
    catalog_set = frozenset(pools.sensitive_apis)
    schedule = signal_schedule(spec)
    n = spec.n_apps
    n_mal = spec.n_malicious
    years = spec.years

    master = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x9E]))
    labels = np.array([1] * n_mal + [0] * (n - n_mal))
    master.shuffle(labels)
    # years cycle within each class so per-(year, class) counts differ by <= 1
    year_of = np.empty(n, dtype=int)
    for cls in (1, 0):
        idx = np.flatnonzero(labels == cls)
        for j, i in enumerate(idx):
            year_of[i] = years[j % len(years)]

    children = np.random.SeedSequence([spec.seed, 0xA7]).spawn(n)
    records = []
    for i in range(n):
        rng = np.random.default_rng(children[i])
        year = int(year_of[i])
        month = int(rng.integers(1, 13))
        malicious = labels[i] == 1
        spoof = (not malicious) and rng.random() < spec.spoof_rate
        records.append(
            _gen_record(
                rng,
                spec,
                pools,
                catalog_set,
                schedule[(year, month)],
                app_id=f"app{i:06d}",
                year=year,
                month=month,
                malicious_profile=malicious or spoof,
                label=Label.MALICIOUS if malicious else Label.BENIGN,
            )
        )
    return records
