import numpy as np
import pytest

from amdbench.features import (
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


def make_record(
    app_id="app0",
    label=Label.BENIGN,
    vt=None,
    year=2011,
    month=6,
    permissions=(),
    hardware=(),
    components=(),
    intents=(),
    resources=(),
    api_calls=None,
    opcodes=(),
    strings=(),
    nodes=(),
    edges=(),
) -> FeatureRecord:
    return FeatureRecord(
        app_id=app_id,
        label=label,
        vt_positives=vt,
        year=year,
        month=month,
        size_mb=1.0,
        manifest=ManifestFeatures(
            hardware=frozenset(hardware),
            components=frozenset(components),
            intents=frozenset(intents),
            permissions=frozenset(permissions),
            resources=frozenset(resources),
        ),
        code=CodeFeatures(
            api_calls=dict(api_calls or {}),
            opcode_seq=tuple(opcodes),
            code_strings=frozenset(strings),
        ),
        graph=ProgramGraph(nodes=tuple(nodes), edges=tuple(edges)),
    )


def graph_of(edge_list, sensitive=(), api_names=None, n_nodes=None):
    """Build a ProgramGraph from edges; nodes in `api_names` become external."""
    api_names = api_names or {}
    ids = {u for e in edge_list for u in e}
    if n_nodes is not None:
        ids |= set(range(n_nodes))
    nodes = []
    for i in sorted(ids):
        if i in api_names:
            nodes.append(
                GraphNode(i, EXTERNAL_API, api_name=api_names[i], sensitive=i in sensitive)
            )
        else:
            nodes.append(GraphNode(i, INTERNAL))
    return ProgramGraph(nodes=tuple(nodes), edges=tuple(edge_list))


@pytest.fixture
def catalog():
    return SensitiveApiCatalog(names=("android.sens.A", "android.sens.B", "android.sens.C"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
