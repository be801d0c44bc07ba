"""Line-oriented topology files.

::

    # comment
    node <id> layer=<0|1> d=<int> u=<int>
    edge <id> <id>
    arc  <from> <to>
    failed <id> [<id> ...]
    resource const <C>          # or: resource seq <c0> <c1> ...

Node ids are free-form tokens mapped to dense indices in declaration order.
Attribute values are parsed but not range-checked; use ``netmodel.validate``.
"""

from __future__ import annotations

from pathlib import Path

from .netmodel import FailureScenario, InterdependentNetwork, NetworkError


class TopologyParseError(NetworkError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _int(token: str, lineno: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise TopologyParseError(lineno, f"{what} must be an integer, got {token!r}") from None


def parse_topology(text: str) -> FailureScenario:
    names: list[str] = []
    index: dict[str, int] = {}
    layer: list[int] = []
    demand: list[int] = []
    utility: list[int] = []
    edges: list[tuple[int, int]] = []
    arcs: list[tuple[int, int]] = []
    failed: set[int] = set()
    constant: int | None = None
    seq: tuple[int, ...] = ()
    saw_resource = False

    def ref(tok: str, lineno: int) -> int:
        if tok not in index:
            raise TopologyParseError(lineno, f"unknown node {tok!r}")
        return index[tok]

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kw, *rest = line.split()
        if kw == "node":
            if not rest:
                raise TopologyParseError(lineno, "node needs an id")
            name, attrs = rest[0], rest[1:]
            if name in index:
                raise TopologyParseError(lineno, f"duplicate node id {name!r}")
            fields = {}
            for a in attrs:
                key, sep, val = a.partition("=")
                if not sep or key not in ("layer", "d", "u"):
                    raise TopologyParseError(lineno, f"bad node attribute {a!r}")
                fields[key] = _int(val, lineno, key)
            missing = {"layer", "d", "u"} - fields.keys()
            if missing:
                raise TopologyParseError(lineno, f"node {name!r} missing {sorted(missing)}")
            index[name] = len(names)
            names.append(name)
            layer.append(fields["layer"])
            demand.append(fields["d"])
            utility.append(fields["u"])
        elif kw in ("edge", "arc"):
            if len(rest) != 2:
                raise TopologyParseError(lineno, f"{kw} needs exactly two node ids")
            pair = (ref(rest[0], lineno), ref(rest[1], lineno))
            (edges if kw == "edge" else arcs).append(pair)
        elif kw == "failed":
            failed.update(ref(tok, lineno) for tok in rest)
        elif kw == "resource":
            if saw_resource:
                raise TopologyParseError(lineno, "resource declared twice")
            saw_resource = True
            if len(rest) == 2 and rest[0] == "const":
                constant = _int(rest[1], lineno, "budget")
            elif len(rest) >= 2 and rest[0] == "seq":
                seq = tuple(_int(t, lineno, "budget") for t in rest[1:])
            else:
                raise TopologyParseError(lineno, "expected 'resource const <C>' or 'resource seq ...'")
        else:
            raise TopologyParseError(lineno, f"unknown keyword {kw!r}")

    network = InterdependentNetwork(
        tuple(layer), tuple(demand), tuple(utility), tuple(edges), tuple(arcs), tuple(names)
    )
    if not saw_resource:
        constant = 1
    return FailureScenario(network, frozenset(failed), constant, seq)


def load_topology(path: str | Path) -> FailureScenario:
    return parse_topology(Path(path).read_text(encoding="utf-8"))


def format_topology(scenario: FailureScenario, header: str = "") -> str:
    net = scenario.network
    nm = net.names
    lines = [f"# {h}" for h in header.splitlines()] if header else []
    for v in range(net.n):
        lines.append(f"node {nm[v]} layer={net.layer[v]} d={net.demand[v]} u={net.utility[v]}")
    for a, b in net.intra_edges:
        lines.append(f"edge {nm[a]} {nm[b]}")
    for a, b in net.dep_arcs:
        lines.append(f"arc {nm[a]} {nm[b]}")
    if scenario.failed:
        lines.append("failed " + " ".join(nm[v] for v in sorted(scenario.failed)))
    if scenario.constant_budget is not None:
        lines.append(f"resource const {scenario.constant_budget}")
    else:
        lines.append("resource seq " + " ".join(str(c) for c in scenario.budgets))
    return "\n".join(lines) + "\n"


def save_topology(scenario: FailureScenario, path: str | Path, header: str = "") -> None:
    Path(path).write_text(format_topology(scenario, header), encoding="utf-8")
