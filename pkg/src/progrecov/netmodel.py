"""Two-layer interdependent network model and its structural transforms.

Nodes are dense integer ids ``0..n-1``. Layer 0 holds control/function nodes,
layer 1 holds infrastructure nodes. Intra-edges are undirected and stay inside a
layer; dependency arcs are directed and cross layers (``(a, b)`` means ``b``
depends on ``a``). A node pair with arcs in both directions is a support pair,
the only place functionality can start from.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence


class NetworkError(ValueError):
    """Raised for malformed networks, scenarios and transform preconditions."""


Edge = tuple[int, int]


def _norm_edge(a: int, b: int) -> Edge:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class InterdependentNetwork:
    layer: tuple[int, ...]
    demand: tuple[int, ...]
    utility: tuple[int, ...]
    intra_edges: tuple[Edge, ...] = ()
    dep_arcs: tuple[Edge, ...] = ()
    names: tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.layer)
        if len(self.demand) != n or len(self.utility) != n:
            raise NetworkError("layer, demand and utility must have equal length")
        object.__setattr__(self, "layer", tuple(int(x) for x in self.layer))
        object.__setattr__(self, "demand", tuple(int(x) for x in self.demand))
        object.__setattr__(self, "utility", tuple(int(x) for x in self.utility))
        object.__setattr__(
            self, "intra_edges", tuple(_norm_edge(int(a), int(b)) for a, b in self.intra_edges)
        )
        object.__setattr__(self, "dep_arcs", tuple((int(a), int(b)) for a, b in self.dep_arcs))
        if not self.names:
            object.__setattr__(self, "names", tuple(str(i) for i in range(n)))
        elif len(self.names) != n:
            raise NetworkError("names must have one entry per node")
        for a, b in self.intra_edges + self.dep_arcs:
            if not (0 <= a < n and 0 <= b < n):
                raise NetworkError(f"edge ({a}, {b}) references an unknown node")

    @property
    def n(self) -> int:
        return len(self.layer)

    def __len__(self) -> int:
        return len(self.layer)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise NetworkError(f"unknown node {name!r}") from None

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        """Undirected adjacency over intra-edges and dependency arcs, sorted."""
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for a, b in self.intra_edges + self.dep_arcs:
            if a != b:
                adj[a].add(b)
                adj[b].add(a)
        return tuple(tuple(sorted(s)) for s in adj)

    @cached_property
    def neighbor_mask(self) -> tuple[int, ...]:
        return tuple(sum(1 << w for w in nb) for nb in self.neighbors)

    @cached_property
    def partner_mask(self) -> tuple[int, ...]:
        """Bitmask of support-pair partners for every node."""
        arcs = set(self.dep_arcs)
        masks = [0] * self.n
        for a, b in arcs:
            if (b, a) in arcs and self.layer[a] != self.layer[b]:
                masks[a] |= 1 << b
        return tuple(masks)

    def layer_nodes(self, layer: int) -> list[int]:
        return [v for v in range(self.n) if self.layer[v] == layer]


@dataclass(frozen=True)
class SupportPair:
    v0: int
    v1: int


@dataclass(frozen=True)
class FailureScenario:
    """A network plus its initial failure set and per-step resource budgets.

    ``constant_budget`` gives the same budget at every allocating step.
    Otherwise ``budgets[k]`` is spent at step ``k + 1``; step 0 is the failure
    instant and receives nothing.
    """

    network: InterdependentNetwork
    failed: frozenset[int]
    constant_budget: int | None = 1
    budgets: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "failed", frozenset(int(v) for v in self.failed))
        object.__setattr__(self, "budgets", tuple(int(c) for c in self.budgets))
        if self.constant_budget is None and not self.budgets:
            raise NetworkError("scenario needs a constant budget or a budget sequence")
        if self.constant_budget is not None and self.constant_budget < 1:
            raise NetworkError("constant budget must be >= 1")
        if any(c < 1 for c in self.budgets):
            raise NetworkError("every budget must be >= 1")
        bad = [v for v in self.failed if not 0 <= v < self.network.n]
        if bad:
            raise NetworkError(f"failed nodes outside the network: {sorted(bad)}")
        if self.constant_budget is None and sum(self.budgets) < self.total_demand:
            raise NetworkError(
                f"budget sequence total {sum(self.budgets)} cannot cover demand {self.total_demand}"
            )

    @property
    def total_demand(self) -> int:
        return sum(max(self.network.demand[v], 0) for v in self.failed)

    def budget(self, step: int) -> int:
        if step < 1:
            return 0
        if self.constant_budget is not None:
            return self.constant_budget
        return self.budgets[step - 1] if step <= len(self.budgets) else 0

    @cached_property
    def horizon(self) -> int:
        """Smallest step count whose cumulative budget covers the failed demand."""
        need = self.total_demand
        if need == 0:
            return 0
        if self.constant_budget is not None:
            return math.ceil(need / self.constant_budget)
        acc = 0
        for k, c in enumerate(self.budgets, start=1):
            acc += c
            if acc >= need:
                return k
        raise NetworkError("budget sequence too short")  # guarded in __post_init__

    def with_network(self, network: InterdependentNetwork, failed: Iterable[int]) -> "FailureScenario":
        return FailureScenario(network, frozenset(failed), self.constant_budget, self.budgets)


def validate(network: InterdependentNetwork) -> list[str]:
    """Return one message per invariant violation; empty when the network is valid."""
    issues: list[str] = []
    nm = network.names
    for v in range(network.n):
        if network.layer[v] not in (0, 1):
            issues.append(f"node {nm[v]}: layer {network.layer[v]} not in {{0, 1}}")
        if network.demand[v] < 0:
            issues.append(f"node {nm[v]}: negative demand {network.demand[v]}")
        if network.utility[v] < 0:
            issues.append(f"node {nm[v]}: negative utility {network.utility[v]}")
    if len(set(nm)) != len(nm):
        issues.append("duplicate node names")
    seen: set[Edge] = set()
    for a, b in network.intra_edges:
        label = f"edge ({nm[a]}, {nm[b]})"
        if a == b:
            issues.append(f"{label}: self-loop")
        elif network.layer[a] != network.layer[b]:
            issues.append(f"{label}: joins layers {network.layer[a]} and {network.layer[b]}")
        if (a, b) in seen:
            issues.append(f"{label}: duplicate")
        seen.add((a, b))
    seen_arcs: set[Edge] = set()
    for a, b in network.dep_arcs:
        label = f"arc ({nm[a]}, {nm[b]})"
        if a == b:
            issues.append(f"{label}: self-loop")
        elif network.layer[a] == network.layer[b]:
            issues.append(f"{label}: both ends in layer {network.layer[a]}")
        if (a, b) in seen_arcs:
            issues.append(f"{label}: duplicate")
        seen_arcs.add((a, b))
    return issues


def validate_scenario(scenario: FailureScenario) -> list[str]:
    issues = validate(scenario.network)
    if scenario.constant_budget is None and sum(scenario.budgets) < scenario.total_demand:
        issues.append("budget schedule cannot cover the failed demand")
    return issues


def find_support_pairs(network: InterdependentNetwork) -> set[SupportPair]:
    arcs = set(network.dep_arcs)
    pairs = set()
    for a, b in arcs:
        if (b, a) in arcs and network.layer[a] == 0 and network.layer[b] == 1:
            pairs.add(SupportPair(a, b))
    return pairs


def is_connected(network: InterdependentNetwork, nodes: Iterable[int] | None = None) -> bool:
    keep = set(range(network.n)) if nodes is None else set(nodes)
    if not keep:
        return True
    start = min(keep)
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in network.neighbors[v]:
            if w in keep and w not in seen:
                seen.add(w)
                queue.append(w)
    return seen == keep


def component_count(network: InterdependentNetwork) -> int:
    seen: set[int] = set()
    count = 0
    for s in range(network.n):
        if s in seen:
            continue
        count += 1
        seen.add(s)
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for w in network.neighbors[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
    return count


def _append_node(net: InterdependentNetwork, layer: int, demand: int, utility: int, name: str):
    return (
        net.layer + (layer,),
        net.demand + (demand,),
        net.utility + (utility,),
        net.names + (name,),
    )


def edge_failure_to_node_failure(
    network: InterdependentNetwork,
    failed_edge: Edge,
    demand: int = 1,
    utility: int = 0,
) -> tuple[InterdependentNetwork, int]:
    """Replace a failed intra-edge ``(a, b)`` with a proxy node ``ab`` on a path a-ab-b.

    Returns the new network and the proxy's id (always ``network.n``); callers add
    the proxy to their failed set.
    """
    a, b = _norm_edge(*failed_edge)
    if (a, b) not in network.intra_edges:
        raise NetworkError(f"no intra-edge ({network.names[a]}, {network.names[b]})")
    proxy = network.n
    layer, dem, util, names = _append_node(
        network, network.layer[a], demand, utility, f"{network.names[a]}{network.names[b]}"
    )
    edges = [e for e in network.intra_edges if e != (a, b)] + [(a, proxy), (proxy, b)]
    net = InterdependentNetwork(layer, dem, util, tuple(edges), network.dep_arcs, names)
    return net, proxy


def to_one_layered(network: InterdependentNetwork) -> tuple[InterdependentNetwork, dict[int, int]]:
    """Move every node into a new layer 1 under a single fresh control node ``x``.

    All original edges and arcs become layer-1 intra-edges, and ``x`` forms a
    support pair with each node that used to sit in layer 0. Requires zero
    utility on the old layer 0.
    """
    offenders = [network.names[v] for v in network.layer_nodes(0) if network.utility[v] > 0]
    if offenders:
        raise NetworkError(f"layer-0 nodes with positive utility: {offenders}")
    mapping = {v: v for v in range(network.n)}
    x = network.n
    edges = {_norm_edge(a, b) for a, b in network.intra_edges + network.dep_arcs if a != b}
    arcs = []
    for v in network.layer_nodes(0):
        arcs += [(x, v), (v, x)]
    net = InterdependentNetwork(
        layer=(1,) * network.n + (0,),
        demand=network.demand + (0,),
        utility=network.utility + (0,),
        intra_edges=tuple(sorted(edges)),
        dep_arcs=tuple(arcs),
        names=network.names + ("x",),
    )
    return net, mapping


def is_one_layered(network: InterdependentNetwork, failed: Iterable[int] = ()) -> bool:
    failed = set(failed)
    return all(network.demand[v] == 0 or v not in failed for v in network.layer_nodes(0))


def aggregate_control_nodes(
    network: InterdependentNetwork, failed: Iterable[int] = ()
) -> tuple[InterdependentNetwork, dict[int, int]]:
    """Merge every layer-0 node into one logical control node placed last.

    Layer-1 nodes keep their relative order and attributes; arc directions to the
    merged node are the union of the original directions.
    """
    if not is_one_layered(network, failed):
        raise NetworkError("aggregate_control_nodes needs a one-layered network")
    controls = network.layer_nodes(0)
    if not controls:
        raise NetworkError("network has no layer-0 node")
    keep = network.layer_nodes(1)
    mapping = {v: i for i, v in enumerate(keep)}
    hub = len(keep)
    for c in controls:
        mapping[c] = hub
    edges = {
        _norm_edge(mapping[a], mapping[b])
        for a, b in network.intra_edges
        if network.layer[a] == 1 and network.layer[b] == 1
    }
    arcs = {(mapping[a], mapping[b]) for a, b in network.dep_arcs}
    net = InterdependentNetwork(
        layer=(1,) * len(keep) + (0,),
        demand=tuple(network.demand[v] for v in keep) + (0,),
        utility=tuple(network.utility[v] for v in keep) + (0,),
        intra_edges=tuple(sorted(edges)),
        dep_arcs=tuple(sorted(arcs)),
        names=tuple(network.names[v] for v in keep) + ("+".join(network.names[c] for c in controls),),
    )
    return net, mapping


def remap_scenario(
    scenario: FailureScenario, network: InterdependentNetwork, mapping: Mapping[int, int]
) -> FailureScenario:
    """Carry a scenario's failed set through a transform's node mapping."""
    failed = {mapping[v] for v in scenario.failed}
    # a merged control node needs no resources, so it never stays failed
    failed = {v for v in failed if network.layer[v] == 1 or network.demand[v] > 0}
    return scenario.with_network(network, failed)


@dataclass(frozen=True)
class PseudoStar:
    """Logical star: the functional set collapsed to one center plus its frontier."""

    center: frozenset[int]
    leaves: tuple[int, ...] = field(default=())


def pseudo_star(network: InterdependentNetwork, functional: Sequence[bool]) -> PseudoStar:
    active = [v for v in range(network.n) if functional[v]]
    if not active:
        raise NetworkError("pseudo star needs at least one functional node")
    leaves = sorted(
        {w for v in active for w in network.neighbors[v] if not functional[w]}
    )
    return PseudoStar(frozenset(active), tuple(leaves))
