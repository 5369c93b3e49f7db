"""Canonical static-feature records: schema, JSONL persistence, validation, queries.

A corpus is a sequence of :class:`FeatureRecord` values, one per app, stored as
newline-delimited JSON (``features.jsonl``, schema version 1).  Records are
immutable after construction; all write paths emit set-valued fields in sorted
order so that identical corpora serialize to identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

SCHEMA_VERSION = 1

INTERNAL = "internal"
EXTERNAL_API = "external_api"
NODE_KINDS = (INTERNAL, EXTERNAL_API)

COMPONENT_KINDS = ("activity", "service", "receiver", "provider")

DEFAULT_OPCODE_VOCAB_SIZE = 256  # Dalvik opcodes fit in one byte


class Label(str, Enum):
    BENIGN = "benign"
    MALICIOUS = "malicious"
    GRAYWARE = "grayware"
    UNKNOWN = "unknown"


class CorpusReadError(ValueError):
    """A corpus file could not be parsed; ``line_number`` is 1-based."""

    def __init__(self, path: str, line_number: int, reason: str):
        super().__init__(f"{path}:{line_number}: {reason}")
        self.path = path
        self.line_number = line_number
        self.reason = reason


@dataclass(frozen=True)
class ManifestFeatures:
    hardware: frozenset[str] = frozenset()
    components: frozenset[tuple[str, str]] = frozenset()  # (kind, name)
    intents: frozenset[str] = frozenset()
    permissions: frozenset[str] = frozenset()
    resources: frozenset[str] = frozenset()


@dataclass(frozen=True)
class CodeFeatures:
    api_calls: dict[str, int] = field(default_factory=dict)
    opcode_seq: tuple[int, ...] = ()
    code_strings: frozenset[str] = frozenset()


@dataclass(frozen=True)
class GraphNode:
    node_id: int
    kind: str
    api_name: str | None = None
    sensitive: bool = False


@dataclass(frozen=True)
class ProgramGraph:
    nodes: tuple[GraphNode, ...] = ()
    edges: tuple[tuple[int, int], ...] = ()

    def node_ids(self) -> list[int]:
        return [n.node_id for n in self.nodes]

    def node_by_id(self) -> dict[int, GraphNode]:
        return {n.node_id: n for n in self.nodes}

    def n_nodes(self) -> int:
        return len(self.nodes)

    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class FeatureRecord:
    app_id: str
    label: Label
    vt_positives: int | None
    year: int
    month: int
    size_mb: float
    manifest: ManifestFeatures
    code: CodeFeatures
    graph: ProgramGraph


@dataclass(frozen=True)
class SensitiveApiCatalog:
    """Ordered list of security-relevant API names; ordering fixes feature indices."""

    names: tuple[str, ...]
    version: str = "v1"

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("catalog contains duplicate API names")

    def __contains__(self, name: object) -> bool:
        return name in self._name_set()

    def __len__(self) -> int:
        return len(self.names)

    def _name_set(self) -> frozenset[str]:
        return frozenset(self.names)

    def index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.names)}

    @classmethod
    def from_file(cls, path: str | Path, version: str | None = None) -> "SensitiveApiCatalog":
        names = []
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            names.append(line)
        return cls(names=tuple(names), version=version or Path(path).stem)

    def to_file(self, path: str | Path) -> None:
        lines = [f"# sensitive API catalog {self.version}"]
        lines.extend(self.names)
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Validation


def validate_record(
    record: FeatureRecord,
    catalog: SensitiveApiCatalog,
    opcode_vocab_size: int = DEFAULT_OPCODE_VOCAB_SIZE,
) -> list[str]:
    """Return all invariant violations for *record* (empty list means ok)."""
    v: list[str] = []
    if not record.app_id:
        v.append("empty app_id")
    if not 1 <= record.month <= 12:
        v.append(f"month {record.month} outside 1..12")
    if record.size_mb < 0:
        v.append(f"negative size_mb {record.size_mb}")
    if record.vt_positives is not None:
        p = record.vt_positives
        if p < 0:
            v.append(f"negative vt_positives {p}")
        else:
            expected = _vt_label(p)
            if record.label != expected:
                v.append(f"label {record.label.value} inconsistent with vt_positives={p}")

    m = record.manifest
    for group, items in (
        ("hardware", m.hardware),
        ("intents", m.intents),
        ("permissions", m.permissions),
        ("resources", m.resources),
    ):
        if any(not s for s in items):
            v.append(f"empty string in manifest.{group}")
    for kind, name in m.components:
        if kind not in COMPONENT_KINDS:
            v.append(f"unknown component kind {kind!r}")
        if not name:
            v.append("empty component name")

    for api, count in record.code.api_calls.items():
        if not api:
            v.append("empty api_call name")
        if count < 1:
            v.append(f"api_call count {count} < 1 for {api!r}")
    for op in record.code.opcode_seq:
        if not 0 <= op < opcode_vocab_size:
            v.append(f"opcode {op} out of range [0, {opcode_vocab_size})")
            break
    if any(not s for s in record.code.code_strings):
        v.append("empty code_string")

    g = record.graph
    ids = g.node_ids()
    if len(set(ids)) != len(ids):
        v.append("duplicate node_ids")
    id_set = set(ids)
    for node in g.nodes:
        if node.kind not in NODE_KINDS:
            v.append(f"unknown node kind {node.kind!r}")
        if node.sensitive:
            if node.kind != EXTERNAL_API:
                v.append(f"sensitive node {node.node_id} is not external_api")
            elif node.api_name is None or node.api_name not in catalog:
                v.append(f"sensitive node {node.node_id} api_name not in catalog")
    for src, dst in g.edges:
        if src not in id_set or dst not in id_set:
            v.append(f"dangling edge ({src}, {dst})")
    return v


def validate_corpus(records: Sequence[FeatureRecord]) -> list[str]:
    """Corpus-level checks: app_id uniqueness."""
    seen: set[str] = set()
    violations = []
    for r in records:
        if r.app_id in seen:
            violations.append(f"duplicate app_id {r.app_id!r}")
        seen.add(r.app_id)
    return violations


def _vt_label(p: int) -> Label:
    if p == 0:
        return Label.BENIGN
    if p >= 4:
        return Label.MALICIOUS
    return Label.GRAYWARE


# ---------------------------------------------------------------------------
# JSONL persistence.  Key order is fixed and documented here; set-valued
# fields are sorted so equal corpora produce byte-identical files.


def _record_to_obj(r: FeatureRecord) -> dict:
    return {
        "v": SCHEMA_VERSION,
        "app_id": r.app_id,
        "label": r.label.value,
        "vt_positives": r.vt_positives,
        "year": r.year,
        "month": r.month,
        "size_mb": r.size_mb,
        "manifest": {
            "hardware": sorted(r.manifest.hardware),
            "components": [list(c) for c in sorted(r.manifest.components)],
            "intents": sorted(r.manifest.intents),
            "permissions": sorted(r.manifest.permissions),
            "resources": sorted(r.manifest.resources),
        },
        "code": {
            "api_calls": {k: r.code.api_calls[k] for k in sorted(r.code.api_calls)},
            "opcode_seq": list(r.code.opcode_seq),
            "code_strings": sorted(r.code.code_strings),
        },
        "graph": {
            "nodes": [
                [n.node_id, n.kind, n.api_name, int(n.sensitive)]
                for n in sorted(r.graph.nodes, key=lambda n: n.node_id)
            ],
            "edges": [list(e) for e in sorted(r.graph.edges)],
        },
    }


def _record_from_obj(obj: dict) -> FeatureRecord:
    if obj.get("v") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {obj.get('v')!r}")
    man = obj["manifest"]
    code = obj["code"]
    graph = obj["graph"]
    return FeatureRecord(
        app_id=obj["app_id"],
        label=Label(obj["label"]),
        vt_positives=obj["vt_positives"],
        year=int(obj["year"]),
        month=int(obj["month"]),
        size_mb=float(obj["size_mb"]),
        manifest=ManifestFeatures(
            hardware=frozenset(man["hardware"]),
            components=frozenset((k, n) for k, n in man["components"]),
            intents=frozenset(man["intents"]),
            permissions=frozenset(man["permissions"]),
            resources=frozenset(man["resources"]),
        ),
        code=CodeFeatures(
            api_calls=dict(code["api_calls"]),
            opcode_seq=tuple(int(x) for x in code["opcode_seq"]),
            code_strings=frozenset(code["code_strings"]),
        ),
        graph=ProgramGraph(
            nodes=tuple(
                GraphNode(node_id=int(i), kind=k, api_name=a, sensitive=bool(s))
                for i, k, a, s in graph["nodes"]
            ),
            edges=tuple((int(s), int(d)) for s, d in graph["edges"]),
        ),
    )


def write_records(records: Iterable[FeatureRecord], path: str | Path) -> None:
    """Write records as newline-delimited UTF-8 JSON, one record per line."""
    path = Path(path)
    lines = []
    for r in records:
        lines.append(json.dumps(_record_to_obj(r), ensure_ascii=False, separators=(",", ":")))
    data = ("\n".join(lines) + "\n") if lines else ""
    path.write_bytes(data.encode("utf-8"))


def read_records(path: str | Path) -> list[FeatureRecord]:
    """Parse a JSONL corpus in file order; malformed lines report their number."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                records.append(_record_from_obj(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusReadError(str(path), lineno, f"malformed record ({exc})") from exc
    return records


def iter_records(path: str | Path) -> Iterator[FeatureRecord]:
    """Streaming variant of :func:`read_records`."""
    yield from read_records(path)


# ---------------------------------------------------------------------------
# Queries


def query(
    records: Sequence[FeatureRecord],
    year_range: tuple[int, int] | None = None,
    label: Label | None = None,
    month_range: tuple[int, int] | None = None,
) -> list[FeatureRecord]:
    """Stable-order subsequence matching all provided predicates."""
    for name, rng in (("year_range", year_range), ("month_range", month_range)):
        if rng is not None and rng[0] > rng[1]:
            raise ValueError(f"inverted {name} {rng}")
    out = []
    for r in records:
        if year_range is not None and not year_range[0] <= r.year <= year_range[1]:
            continue
        if month_range is not None and not month_range[0] <= r.month <= month_range[1]:
            continue
        if label is not None and r.label != label:
            continue
        out.append(r)
    return out


def with_label(record: FeatureRecord, label: Label, vt_positives: int | None) -> FeatureRecord:
    """Return a copy of *record* with the label fields replaced."""
    return replace(record, label=label, vt_positives=vt_positives)
