"""Scenario construction: random graphs, attribute sampling, fixtures and the adversarial motif."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .netmodel import FailureScenario, InterdependentNetwork, NetworkError, is_connected
from .topofile import parse_topology

DATA_VERSION = "v1"


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def read_fixture(name: str) -> str:
    return resources.files("progrecov").joinpath("data", DATA_VERSION, name).read_text(encoding="utf-8")


@dataclass(frozen=True)
class AttributeRanges:
    utility: tuple[int, int] = (1, 4)
    demand: tuple[int, int] = (1, 2)
    budget: int = 1

    def __post_init__(self):
        for label, (lo, hi) in (("utility", self.utility), ("demand", self.demand)):
            if not 1 <= lo <= hi:
                raise ValueError(f"{label} range must satisfy 1 <= lo <= hi, got {(lo, hi)}")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")


DEFAULT_RANGES = AttributeRanges()


def sample_gnp_edges(n: int, p: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    """One Erdos-Renyi draw: each of the n(n-1)/2 pairs independently with probability p."""
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    keep = rng.random(len(pairs)) < p
    return [e for e, k in zip(pairs, keep) if k]


def designate_control(n: int, edges, control: int, names=None) -> InterdependentNetwork:
    """Make ``control`` the single layer-0 node; its edges become support pairs."""
    intra, arcs = [], []
    for a, b in edges:
        if control in (a, b):
            other = b if a == control else a
            arcs += [(control, other), (other, control)]
        else:
            intra.append((a, b))
    layer = tuple(0 if v == control else 1 for v in range(n))
    return InterdependentNetwork(
        layer, (0,) * n, (0,) * n, tuple(intra), tuple(arcs), tuple(names) if names else ()
    )


def gnp_connected(n: int, p: float, seed=0, max_retries: int = 10_000) -> InterdependentNetwork:
    if n < 2 or not 0 < p < 1:
        raise ValueError("need n >= 2 and 0 < p < 1")
    rng = _rng(seed)
    for _ in range(max_retries):
        edges = sample_gnp_edges(n, p, rng)
        probe = InterdependentNetwork((1,) * n, (0,) * n, (0,) * n, tuple(edges))
        if is_connected(probe):
            control = int(rng.integers(n))
            return designate_control(n, edges, control)
    raise NetworkError(f"no connected G({n}, {p}) in {max_retries} draws; try a larger p")


def assign_attributes(network: InterdependentNetwork, ranges: AttributeRanges = DEFAULT_RANGES, seed=0) -> FailureScenario:
    """Uniform integer utility and demand per layer-1 node; every layer-1 node starts failed."""
    rng = _rng(seed)
    demand = list(network.demand)
    utility = list(network.utility)
    for v in range(network.n):
        if network.layer[v] == 1:
            utility[v] = int(rng.integers(ranges.utility[0], ranges.utility[1] + 1))
            demand[v] = int(rng.integers(ranges.demand[0], ranges.demand[1] + 1))
        else:
            demand[v] = utility[v] = 0
    net = InterdependentNetwork(
        network.layer, tuple(demand), tuple(utility), network.intra_edges, network.dep_arcs, network.names
    )
    return FailureScenario(net, frozenset(net.layer_nodes(1)), ranges.budget)


def inject_adversarial(scenario: FailureScenario, x: int, anchor: int) -> FailureScenario:
    """Attach the three-node motif A, B, C to ``anchor`` and mark it failed.

    A (u=1, d=x) and B (u=1, d=x+1) hang off the anchor; C (u=10, d=x) sits
    behind B. A greedy utility/demand rule takes A first and finds C late.
    """
    net = scenario.network
    if not 0 <= anchor < net.n:
        raise NetworkError(f"unknown anchor {anchor}")
    if x < 1:
        raise ValueError("x must be a positive integer")
    a, b, c = net.n, net.n + 1, net.n + 2
    taken = set(net.names)
    names = []
    for base in ("A", "B", "C"):
        name = base
        while name in taken:
            name += "'"
        taken.add(name)
        names.append(name)
    edges = list(net.intra_edges)
    arcs = list(net.dep_arcs)
    for leaf in (a, b):
        if net.layer[anchor] == 1:
            edges.append((anchor, leaf))
        else:
            arcs += [(anchor, leaf), (leaf, anchor)]
    edges.append((b, c))
    new = InterdependentNetwork(
        net.layer + (1, 1, 1),
        net.demand + (x, x + 1, x),
        net.utility + (1, 1, 10),
        tuple(edges),
        tuple(arcs),
        net.names + tuple(names),
    )
    return FailureScenario(new, scenario.failed | {a, b, c}, scenario.constant_budget, scenario.budgets)


def adversarial_motif(x: int) -> FailureScenario:
    """The motif on its own, anchored at an intact control node O, budget 1."""
    base = InterdependentNetwork((0,), (0,), (0,), names=("O",))
    return inject_adversarial(FailureScenario(base, frozenset(), 1), x, 0)


def make_gnp_scenario(n: int, p: float = 0.2, seed=0, ranges: AttributeRanges = DEFAULT_RANGES, x: int | None = None) -> FailureScenario:
    """Connected GNP graph with one control node and sampled attributes.

    With ``x`` set, the adversarial motif is attached to the control node.
    """
    rng = _rng(seed)
    scenario = assign_attributes(gnp_connected(n, p, rng), ranges, rng)
    if x:
        control = scenario.network.layer_nodes(0)[0]
        scenario = inject_adversarial(scenario, x, control)
    return scenario


def motivating_fixture() -> FailureScenario:
    """Four servers v1..v4 in a chain; f1, f2 pair with v1, v2; f3, f4 are hosted on v3, v4."""
    return parse_topology(read_fixture("motivating.net"))


# Per-step rows of the two recovery orders compared on the motivating fixture.
def motivating_plans() -> dict[str, list[list[int]]]:
    scen = motivating_fixture()
    net = scen.network
    out = {}
    for label, seq in (("P1", ["v1", "v2", "v3", "v4"]), ("P2", ["v4", "v3", "v2", "v1"])):
        rows = []
        for name in seq:
            v = net.index(name)
            for _ in range(net.demand[v]):
                row = [0] * net.n
                row[v] = 1
                rows.append(row)
        out[label] = rows
    return out


def ibm_fixture(adversarial: bool = False) -> FailureScenario:
    """18-node, 16-edge backbone with control O attached to n0 only.

    Attributes are synthetic. The adversarial variant raises d(n2) from 2 to 3.
    """
    scen = parse_topology(read_fixture("ibm.net"))
    if not adversarial:
        return scen
    net = scen.network
    n2 = net.index("n2")
    demand = list(net.demand)
    demand[n2] = 3
    new = InterdependentNetwork(net.layer, tuple(demand), net.utility, net.intra_edges, net.dep_arcs, net.names)
    return FailureScenario(new, scen.failed, scen.constant_budget, scen.budgets)


def bt_fixture(seed=0, ranges: AttributeRanges = DEFAULT_RANGES) -> FailureScenario:
    """36-node, 76-edge stand-in topology with a random control node and sampled attributes."""
    raw = parse_topology(read_fixture("bt_north_america.net")).network
    rng = _rng(seed)
    control = int(rng.integers(raw.n))
    net = designate_control(raw.n, raw.intra_edges, control, raw.names)
    return assign_attributes(net, ranges, rng)
