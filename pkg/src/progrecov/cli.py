"""Command-line harness: generate scenarios, run planners, train DeepPR, summarise results.

Exit codes: 0 success (possibly with warnings), 2 usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from collections import defaultdict
from dataclasses import dataclass, fields
from pathlib import Path

from . import agent, neural, scenlab, solvers
from .dynamics import write_plan_csv
from .netmodel import (
    NetworkError,
    aggregate_control_nodes,
    edge_failure_to_node_failure,
    remap_scenario,
    to_one_layered,
)
from .topofile import load_topology, save_topology

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3
ALGORITHMS = ("ratio", "random", "dpopt", "brute", "deeppr")
RESULT_HEADER = ["instance", "algo", "seed", "n", "total_utility", "optimal_utility", "ratio_to_opt", "elapsed_s"]
SUMMARY_HEADER = ["algo", "bucket", "count", "mean_pct_of_opt"]


class DataError(Exception):
    """Bad or missing input data; maps to exit code 3."""


class UsageError(Exception):
    """Inconsistent flags detected after parsing; maps to exit code 2."""


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


# --- scenario sources ---------------------------------------------------------


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    params: dict

    @property
    def seeded(self) -> bool:
        return self.kind in ("gnp", "bt")

    @property
    def label(self) -> str:
        if not self.params:
            return self.kind
        return self.kind + ":" + ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))


GEN_KINDS = {
    "gnp": {"n", "p", "x", "u", "d", "c"},
    "bt": {"u", "d", "c"},
    "ibm": {"adversarial"},
    "motivating": set(),
    "motif": {"x"},
}


def parse_generator(text: str) -> GeneratorSpec:
    """``kind[:key=value,...]``, e.g. ``gnp:n=8,p=0.2,x=3`` or ``ibm:adversarial=1``."""
    kind, _, rest = text.partition(":")
    if kind not in GEN_KINDS:
        raise argparse.ArgumentTypeError(f"unknown generator {kind!r}; choose from {sorted(GEN_KINDS)}")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq or key not in GEN_KINDS[kind]:
            raise argparse.ArgumentTypeError(f"bad generator parameter {item!r} for {kind}")
        params[key] = value
    if kind == "gnp" and "n" not in params:
        raise argparse.ArgumentTypeError("gnp generator needs n=<nodes>")
    return GeneratorSpec(kind, params)


def _range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition("-")
    return int(lo), int(hi or lo)


def _ranges(params: dict) -> scenlab.AttributeRanges:
    base = scenlab.DEFAULT_RANGES
    return scenlab.AttributeRanges(
        _range(params["u"]) if "u" in params else base.utility,
        _range(params["d"]) if "d" in params else base.demand,
        int(params.get("c", base.budget)),
    )


def build_scenario(spec: GeneratorSpec, seed: int):
    p = spec.params
    try:
        if spec.kind == "gnp":
            x = int(p["x"]) if "x" in p else None
            return scenlab.make_gnp_scenario(int(p["n"]), float(p.get("p", 0.2)), seed, _ranges(p), x)
        if spec.kind == "bt":
            return scenlab.bt_fixture(seed, _ranges(p))
        if spec.kind == "ibm":
            return scenlab.ibm_fixture(p.get("adversarial", "0") not in ("0", "false", "no"))
        if spec.kind == "motif":
            return scenlab.adversarial_motif(int(p.get("x", 1)))
        return scenlab.motivating_fixture()
    except ValueError as exc:
        raise DataError(f"{spec.label}: {exc}") from exc


def _instances(args) -> list[tuple[str, int, object]]:
    """``(label, seed, scenario)`` triples from --topology files or a --gen spec."""
    out = []
    if args.topology:
        for path in args.topology:
            scen = _load(path)
            for seed in args.seeds:
                out.append((Path(path).stem, seed, scen))
    else:
        spec = args.gen
        for seed in args.seeds:
            out.append((spec.label, seed, build_scenario(spec, seed)))
    return out


def _load(path: str):
    try:
        return load_topology(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except NetworkError as exc:
        raise DataError(f"{path}: {exc}") from exc


# --- optimum and algorithms ----------------------------------------------------


def reference_optimum(scenario) -> int | None:
    pending = sum(1 for v in scenario.failed if scenario.network.demand[v] > 0)
    if pending <= solvers.DP_MAX_FAILED:
        try:
            return solvers.dp_opt(scenario).total_utility
        except solvers.PlannerError:
            pass
    if pending <= 10:
        return solvers.brute_force(scenario).total_utility
    return None


def run_algorithm(algo: str, scenario, seed: int, train_cfg: agent.TrainConfig):
    if algo == "ratio":
        return solvers.run_planner(scenario, solvers.ratio_step)
    if algo == "random":
        return solvers.run_planner(scenario, solvers.random_policy(seed))
    if algo == "dpopt":
        return solvers.dp_opt(scenario)
    if algo == "brute":
        return solvers.brute_force(scenario)
    cfg = agent.TrainConfig(**{**_cfg_dict(train_cfg), "seed": seed})
    start = time.perf_counter()
    trained = agent.train(scenario, cfg)
    res = solvers.run_planner(scenario, agent.greedy_policy(trained.params))
    res.elapsed = time.perf_counter() - start
    return res


def _cfg_dict(cfg: agent.TrainConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


def _fmt_ratio(total: int | None, opt: int | None) -> str:
    if total is None or not opt:
        return "NA"
    return f"{total / opt:.6f}"


# --- subcommands ----------------------------------------------------------------


def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = args.gen
    seeds = args.seeds if spec.seeded else args.seeds[:1]
    for seed in seeds:
        scen = build_scenario(spec, seed)
        stem = spec.label.replace(":", "_").replace(",", "_").replace("=", "")
        name = f"{stem}_s{seed}.net" if spec.seeded else f"{stem}.net"
        header = f"generated by progrecov generate --gen {spec.label}" + (f" --seed {seed}" if spec.seeded else "")
        save_topology(scen, out / name, header)
        print(out / name)
    return EXIT_OK


def cmd_solve(args) -> int:
    algos = args.algo
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = _train_config(args)
    rows = []
    status = EXIT_OK
    optima: dict[tuple[str, int], int | None] = {}
    for label, seed, scen in _instances(args):
        key = (label, seed if args.gen else 0)
        if key not in optima:
            optima[key] = reference_optimum(scen)
            if optima[key] is None:
                _warn(f"{label} seed {seed}: instance too large for an exact optimum; opt=NA")
        opt = optima[key]
        for algo in algos:
            try:
                res = run_algorithm(algo, scen, seed, cfg)
            except solvers.PlannerError as exc:
                _warn(f"{label} seed {seed} {algo}: {exc}; opt=NA")
                rows.append([label, algo, seed, scen.network.n, "NA", "NA", "NA", "NA"])
                continue
            if args.plans:
                fname = f"plan_{label.replace(':', '_').replace(',', '_')}_{algo}_s{seed}.csv"
                write_plan_csv(res.plan, scen.network, out / fname)
            elapsed = "NA" if args.no_timing else f"{res.elapsed:.4f}"
            rows.append([
                label, algo, seed, scen.network.n, res.total_utility,
                "NA" if opt is None else opt, _fmt_ratio(res.total_utility, opt), elapsed,
            ])
    rows.sort(key=lambda r: (r[0], r[3], r[1], r[2]))
    path = out / args.results
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        w.writerows(rows)
    print(path)
    return status


def _train_config(args) -> agent.TrainConfig:
    cfg = agent.TrainConfig(
        episodes=args.episodes,
        gamma=args.gamma,
        lr=args.lr,
        hidden=args.hidden,
        replay_capacity=args.replay_capacity,
        batch_size=args.batch_size,
        sync_period=args.sync_period,
        eps_start=args.epsilon_start,
        eps_end=args.epsilon_end,
        eps_decrement=args.epsilon_decrement,
        omega_ratio=args.omega_ratio,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return cfg


def cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = _train_config(args)
    if args.checkpoint and len(args.seeds) > 1:
        raise UsageError("--checkpoint names a single file; pass one --seed or omit it")
    for label, seed, scen in _instances(args):
        run_cfg = agent.TrainConfig(**{**_cfg_dict(cfg), "seed": seed})
        result = agent.train(scen, run_cfg)
        curve = out / f"curve_s{seed}.csv"
        ckpt = Path(args.checkpoint) if args.checkpoint else out / f"checkpoint_s{seed}.npz"
        agent.write_curve_csv(result.curve, curve)
        neural.save_checkpoint(ckpt, result.params, result.adam)
        greedy = agent.greedy_return(scen, result.params)
        print(f"{label} seed {seed}: greedy return {greedy}; wrote {curve} and {ckpt}")
    return EXIT_OK


def cmd_compare(args) -> int:
    missing = [p for p in args.results + (args.curves or []) if not Path(p).is_file()]
    if missing:
        raise DataError("missing input files: " + ", ".join(missing))
    buckets: dict[tuple[str, str], list[float]] = defaultdict(list)
    seen = set()
    width = args.bucket_width
    for path in args.results:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != RESULT_HEADER:
                raise DataError(f"{path}: unexpected header {reader.fieldnames}")
            for rec in reader:
                n = int(rec["n"])
                lo = (n // width) * width
                bucket = str(n) if width == 1 else f"{lo}-{lo + width - 1}"
                seen.add((rec["algo"], bucket, lo))
                if rec["ratio_to_opt"] != "NA":
                    buckets[(rec["algo"], bucket)].append(100.0 * float(rec["ratio_to_opt"]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = out / "summary.csv"
    with open(summary, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for algo, bucket, _ in sorted(seen, key=lambda t: (t[0], t[2])):
            vals = buckets.get((algo, bucket), [])
            mean = f"{sum(vals) / len(vals):.4f}" if vals else "NA"
            w.writerow([algo, bucket, len(vals), mean])
    script = out / "plot_summary.py"
    script.write_text(_plot_script(summary.name, [str(Path(c).resolve()) for c in args.curves or []]), encoding="utf-8")
    print(summary)
    print(script)
    return EXIT_OK


def _plot_script(summary_name: str, curves: list[str]) -> str:
    return f'''"""Plot the comparison summary (and learning curves, if any). Needs matplotlib."""
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
CURVES = {curves!r}

series = defaultdict(list)
with open(HERE / {summary_name!r}, newline="") as fh:
    for rec in csv.DictReader(fh):
        if rec["mean_pct_of_opt"] != "NA":
            series[rec["algo"]].append((rec["bucket"], float(rec["mean_pct_of_opt"])))

fig, ax = plt.subplots()
for algo, points in sorted(series.items()):
    ax.plot([b for b, _ in points], [v for _, v in points], marker="o", label=algo)
ax.set_xlabel("network size")
ax.set_ylabel("% of optimum")
ax.legend()
fig.savefig(HERE / "summary.png", dpi=150)

if CURVES:
    fig, ax = plt.subplots()
    for path in CURVES:
        with open(path, newline="") as fh:
            returns = [int(r["return"]) for r in csv.DictReader(fh)]
        window = 50
        smooth = [sum(returns[max(0, i - window + 1):i + 1]) / len(returns[max(0, i - window + 1):i + 1])
                  for i in range(len(returns))]
        ax.plot(smooth, label=Path(path).stem)
    ax.set_xlabel("episode")
    ax.set_ylabel("return (moving average)")
    ax.legend()
    fig.savefig(HERE / "curves.png", dpi=150)
'''


def cmd_convert(args) -> int:
    scen = _load(args.topology)
    net = scen.network
    try:
        if args.op == "one-layer":
            new, mapping = to_one_layered(net)
            scen2 = remap_scenario(scen, new, mapping)
        elif args.op == "aggregate":
            new, mapping = aggregate_control_nodes(net, scen.failed)
            scen2 = remap_scenario(scen, new, mapping)
        else:
            if not args.edge:
                raise UsageError("edge-to-node needs --edge A B")
            a, b = (net.index(name) for name in args.edge)
            new, proxy = edge_failure_to_node_failure(net, (a, b), args.proxy_demand)
            scen2 = scen.with_network(new, set(scen.failed) | {proxy})
    except NetworkError as exc:
        raise DataError(f"{args.topology}: {exc}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    target = out / (args.output or f"{Path(args.topology).stem}_{args.op}.net")
    save_topology(scen2, target, f"{args.op} transform of {Path(args.topology).name}")
    print(target)
    return EXIT_OK


# --- argument parsing ------------------------------------------------------------


def _algo_list(text: str) -> list[str]:
    algos = [a.strip() for a in text.split(",") if a.strip()]
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad or not algos:
        raise argparse.ArgumentTypeError(f"unknown algorithm(s) {bad}; choose from {', '.join(ALGORITHMS)}")
    return algos


def _add_source(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--topology", action="append", metavar="FILE", help="topology file (repeatable)")
    g.add_argument("--gen", type=parse_generator, metavar="SPEC", help="generator, e.g. gnp:n=8,p=0.2[,x=3]")


def _add_training(p: argparse.ArgumentParser) -> None:
    d = agent.TrainConfig()
    p.add_argument("--episodes", type=int, default=d.episodes)
    p.add_argument("--gamma", type=float, default=d.gamma)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--hidden", type=int, default=d.hidden)
    p.add_argument("--replay-capacity", type=int, default=d.replay_capacity)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--sync-period", type=int, default=d.sync_period)
    p.add_argument("--epsilon-start", type=float, default=d.eps_start)
    p.add_argument("--epsilon-end", type=float, default=d.eps_end)
    p.add_argument("--epsilon-decrement", type=float, default=d.eps_decrement)
    p.add_argument("--omega-ratio", type=float, default=d.omega_ratio)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", dest="seed", type=int, action="append", metavar="N", help="repeatable; default 0")
    common.add_argument("--out", default=".", metavar="DIR", help="output directory (default: current)")
    common.add_argument("--config", metavar="FILE", help="key=value defaults for this subcommand")

    parser = argparse.ArgumentParser(prog="progrecov", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write scenarios as topology files")
    p.add_argument("--gen", type=parse_generator, required=True, metavar="SPEC")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", parents=[common], help="run planners and write a results CSV")
    _add_source(p)
    p.add_argument("--algo", type=_algo_list, default=["ratio", "dpopt"], metavar="LIST", help="comma-separated")
    p.add_argument("--results", default="results.csv", metavar="NAME")
    p.add_argument("--plans", action="store_true", help="also write one plan CSV per row")
    p.add_argument("--no-timing", action="store_true", help="write elapsed_s as NA for byte-stable output")
    _add_training(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("train", parents=[common], help="train DeepPR and write curve CSV plus checkpoint")
    _add_source(p)
    p.add_argument("--checkpoint", metavar="FILE")
    _add_training(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", parents=[common], help="summarise result CSVs and emit a plot script")
    p.add_argument("--results", nargs="+", required=True, metavar="CSV")
    p.add_argument("--curves", nargs="*", metavar="CSV")
    p.add_argument("--bucket-width", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("convert", parents=[common], help="apply a network transform to a topology file")
    p.add_argument("--topology", required=True, metavar="FILE")
    p.add_argument("--op", choices=["one-layer", "aggregate", "edge-to-node"], required=True)
    p.add_argument("--edge", nargs=2, metavar=("A", "B"))
    p.add_argument("--proxy-demand", type=int, default=1)
    p.add_argument("--output", metavar="NAME")
    p.set_defaults(func=cmd_convert)
    return parser


def _read_config(path: str) -> dict[str, str]:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _parse(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config:
        overrides = _read_config(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        actions = {a.dest: a for a in subparser._actions}
        unknown = sorted(k for k in overrides if k not in actions or k in ("config", "help"))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        if "seed" in overrides:
            overrides["seed"] = [int(s) for s in overrides["seed"].split(",")]
        for key, value in overrides.items():
            action = actions[key]
            if isinstance(action, argparse._StoreTrueAction):
                overrides[key] = value.lower() in ("1", "true", "yes", "on")
            elif isinstance(value, str) and action.type is not None:
                try:
                    overrides[key] = action.type(value)
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise UsageError(f"config {key}: {exc}") from exc
        subparser.set_defaults(**overrides)
        args = parser.parse_args(argv)
    seeds = args.seed or [0]
    args.seeds = sorted(set(seeds))
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        try:
            args = _parse(parser, argv)
        except SystemExit as exc:
            # argparse exits 0 for --help and 2 for bad arguments
            return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
        return args.func(args)
    except UsageError as exc:
        print(f"progrecov: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"progrecov: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
