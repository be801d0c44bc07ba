import pytest
from hypothesis import given, settings, strategies as st

from progrecov.netmodel import FailureScenario, InterdependentNetwork, validate
from progrecov.topofile import (
    TopologyParseError,
    format_topology,
    load_topology,
    parse_topology,
    save_topology,
)

SMALL = """\
# two servers, one controller
node O layer=0 d=0 u=0
node a layer=1 d=2 u=3   # trailing comment
node b layer=1 d=1 u=1

edge a b
arc O a
arc a O
failed a b
resource const 2
"""


def test_parse_small():
    s = parse_topology(SMALL)
    net = s.network
    assert net.names == ("O", "a", "b")
    assert net.layer == (0, 1, 1)
    assert net.demand == (0, 2, 1) and net.utility == (0, 3, 1)
    assert net.intra_edges == ((1, 2),)
    assert net.dep_arcs == ((0, 1), (1, 0))
    assert s.failed == {1, 2}
    assert s.constant_budget == 2


def test_resource_sequence():
    s = parse_topology("node a layer=1 d=3 u=1\nfailed a\nresource seq 1 1 2\n")
    assert s.constant_budget is None and s.budgets == (1, 1, 2)
    assert s.horizon == 3


def test_default_budget_is_one():
    assert parse_topology("node a layer=1 d=1 u=1\n").constant_budget == 1


@pytest.mark.parametrize(
    "text, lineno, fragment",
    [
        ("node a layer=1 d=1 u=1\nlink a a\n", 2, "unknown keyword 'link'"),
        ("node a layer=1 d=1 u=1\nnode a layer=1 d=1 u=1\n", 2, "duplicate node id 'a'"),
        ("node a layer=1 d=1 u=1\n\nedge a b\n", 3, "unknown node 'b'"),
        ("node a layer=1 d=1 u=1\nfailed z\n", 2, "unknown node 'z'"),
        ("node a layer=1 d=x u=1\n", 1, "d must be an integer"),
        ("node a layer=1 d=1\n", 1, "missing ['u']"),
        ("node a layer=1 d=1 u=1 w=2\n", 1, "bad node attribute"),
        ("node a layer=1 d=1 u=1\nedge a\n", 2, "exactly two"),
        ("resource const 1\nresource const 2\n", 2, "declared twice"),
        ("resource mystery 1\n", 1, "resource const"),
    ],
)
def test_errors_carry_line_numbers(text, lineno, fragment):
    with pytest.raises(TopologyParseError) as info:
        parse_topology(text)
    assert info.value.lineno == lineno
    assert str(info.value).startswith(f"line {lineno}:")
    assert fragment in str(info.value)


def test_negative_demand_loads_and_validate_flags_it():
    s = parse_topology("node a layer=1 d=-1 u=1\n")
    issues = validate(s.network)
    assert len(issues) == 1 and "negative demand" in issues[0]


def test_file_round_trip(tmp_path):
    s = parse_topology(SMALL)
    path = tmp_path / "small.net"
    save_topology(s, path, "header line")
    assert path.read_text().startswith("# header line\n")
    assert load_topology(path) == s


@st.composite
def scenarios(draw):
    n1 = draw(st.integers(1, 6))
    n0 = draw(st.integers(0, 2))
    n = n1 + n0
    layer = (1,) * n1 + (0,) * n0
    demand = tuple(draw(st.integers(0, 5)) for _ in range(n))
    utility = tuple(draw(st.integers(0, 5)) for _ in range(n))
    pairs = [(a, b) for a in range(n1) for b in range(a + 1, n1)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    cross = [(a, b) for a in range(n) for b in range(n) if layer[a] != layer[b]]
    arcs = draw(st.lists(st.sampled_from(cross), unique=True)) if cross else []
    failed = draw(st.frozensets(st.integers(0, n - 1)))
    net = InterdependentNetwork(layer, demand, utility, tuple(edges), tuple(arcs))
    if draw(st.booleans()):
        return FailureScenario(net, failed, draw(st.integers(1, 4)))
    need = sum(demand[v] for v in failed)
    budgets = tuple(draw(st.lists(st.integers(1, 3), min_size=max(need, 1), max_size=max(need, 1) + 2)))
    return FailureScenario(net, failed, None, budgets)


@given(scenarios())
@settings(max_examples=150, deadline=None)
def test_format_parse_round_trip(scenario):
    assert parse_topology(format_topology(scenario)) == scenario
