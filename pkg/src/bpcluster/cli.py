"""Command-line entry point: ``bpcluster <subcommand> ...``.

Every flag can also be set through an environment variable named
``BPCLUSTER_<FLAG>`` (upper case, dashes as underscores); explicit flags win.
Exit codes: 0 ok, 2 usage, 3 input/output, 4 BP did not converge,
5 contraction budget exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .errors import BudgetExceededError, GraphError, TensorError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NOT_CONVERGED = 4
EXIT_BUDGET = 5

ENV_PREFIX = "BPCLUSTER_"

log = logging.getLogger("bpcluster")


class NotConverged(Exception):
    pass


@dataclass
class RunConfig:
    """Everything a run depends on.

    ``params`` determine the numbers; ``io`` (paths, thread count, verbosity)
    cannot change them and is echoed but kept out of the config hash.
    """

    subcommand: str
    params: dict = field(default_factory=dict)
    io: dict = field(default_factory=dict)
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def digest(self) -> str:
        keyed = {"subcommand": self.subcommand, "params": self.params, "version": self.version}
        canon = json.dumps(keyed, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def csv_header(self) -> str:
        return f"bpcluster {self.version} config {self.digest()}"

    def echo(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "config.json"
        path.write_text(self.to_json() + "\n")
        return path


# -- parser ------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _add_bp_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("belief propagation")
    g.add_argument("--damping", type=float, default=0.0)
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--tol", type=float, default=1e-10)
    g.add_argument("--max-iters", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--init", choices=["uniform", "random"], default="uniform")


def _add_threads(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bpcluster",
        description="Contract closed tensor networks with BP plus loop/cluster corrections.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("contract", help="contract a network file")
    p.add_argument("--network", required=True)
    p.add_argument("--mode", choices=["exact", "bp", "cluster"], default="exact")
    p.add_argument("--max-weight", type=int, default=8)
    p.add_argument("--budget", type=int, default=2**24)
    p.add_argument("--cache", default=None)
    _add_bp_flags(p)
    _add_threads(p)

    p = sub.add_parser("enumerate", help="enumerate loops and clusters of a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--max-weight", type=int, required=True)
    p.add_argument("--cache", required=True)

    p = sub.add_parser("expand", help="cluster expansion ledger as CSV")
    p.add_argument("--network", required=True)
    p.add_argument("--max-weight", type=int, required=True)
    p.add_argument("--loop-series", action="store_true")
    p.add_argument("--cache", default=None)
    p.add_argument("--out", default=None, help="directory for expansion.csv and config.json")
    _add_bp_flags(p)
    _add_threads(p)

    p = sub.add_parser("ising-benchmark", help="square-lattice Ising sweep")
    p.add_argument("--L", type=_int_list, default=[10, 20])
    p.add_argument("--beta-min", type=float, default=0.25)
    p.add_argument("--beta-max", type=float, default=0.45)
    p.add_argument("--beta-steps", type=int, default=21)
    p.add_argument("--max-weight", type=int, default=8)
    p.add_argument("--out", required=True)
    p.add_argument("--cache", default=None)
    p.add_argument("--no-loop-series", action="store_true")
    p.add_argument(
        "--diagnostics", action="store_true",
        help="also write E(theta) scans and message-perturbation responses",
    )
    p.add_argument("--field", type=float, default=0.1, help="local field for the response run")
    _add_threads(p)

    p = sub.add_parser("lattice", help="write a square-lattice graph file")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--open", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("ising-network", help="write an Ising tensor network file")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--open", action="store_true")
    p.add_argument("--out", required=True)

    _apply_env_defaults(parser)
    return parser


def _apply_env_defaults(parser: argparse.ArgumentParser) -> None:
    """Replace flag defaults by ``BPCLUSTER_<FLAG>`` values when present."""
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sp in action.choices.values():
                _apply_env_defaults(sp)
            continue
        if not action.option_strings or action.dest in ("help", "version"):
            continue
        env = os.environ.get(ENV_PREFIX + action.dest.upper())
        if env is None:
            continue
        if isinstance(action, argparse._StoreTrueAction):
            action.default = env.strip().lower() in ("1", "true", "yes", "on")
        elif isinstance(action, argparse._CountAction):
            action.default = int(env)
        else:
            action.default = action.type(env) if action.type else env
            action.required = False


# -- subcommands -------------------------------------------------------------


def _read_text(path) -> str:
    with open(path) as f:
        return f.read()


def _schedule(args):
    from .bp import BpSchedule

    return BpSchedule(
        damping=args.damping,
        noise=args.noise,
        tol=args.tol,
        max_iters=args.max_iters,
        seed=args.seed,
        init=args.init,
    )


def _converged_bp(tn, args):
    from .bp import run_bp

    msgs, report = run_bp(tn, _schedule(args))
    log.info("BP: %d iterations, residual %.3g", report.iterations, report.residual)
    if not report.converged:
        raise NotConverged(
            f"BP did not converge after {report.iterations} iterations "
            f"(residual {report.residual:.3g} > tol {args.tol:g})"
        )
    return msgs, report


def cmd_contract(args, config: RunConfig) -> int:
    from .enumeration import load_or_build
    from .network import ContractionValue, exact_contract, read_network
    from .series import cluster_expansion

    tn = read_network(_read_text(args.network))
    out = {"mode": args.mode}
    if args.mode == "exact":
        val = exact_contract(tn, args.budget)
    else:
        msgs, report = _converged_bp(tn, args)
        out["bp"] = json.loads(report.to_json())
        if args.mode == "bp":
            val = ContractionValue.from_log(report.log_Z0)
        else:
            catalog, clusters, _ = load_or_build(tn.graph, args.max_weight, None, args.cache)
            ledger = cluster_expansion(
                tn, msgs, catalog, clusters, args.max_weight, threads=args.threads
            )
            val = ContractionValue.from_log(ledger.log_z(args.max_weight))
            out["max_weight"] = args.max_weight
    out["log_magnitude"] = val.log_magnitude
    out["phase"] = [val.phase.real, val.phase.imag]
    out["free_energy"] = val.free_energy
    if "bp" in out:
        out["bp"].pop("local_Z", None)
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_enumerate(args, config: RunConfig) -> int:
    from .enumeration import load_or_build
    from .graph import read_graph

    g = read_graph(_read_text(args.graph))
    catalog, clusters, hit = load_or_build(g, args.max_weight, None, args.cache)
    print(
        json.dumps(
            {
                "graph_hash": g.content_hash(),
                "max_weight": args.max_weight,
                "loops": len(catalog),
                "clusters": len(clusters),
                "cache_hit": hit,
            },
            indent=2,
            sort_keys=True,
        )
    )
    return EXIT_OK


def cmd_expand(args, config: RunConfig) -> int:
    from .enumeration import load_or_build
    from .network import read_network
    from .series import cluster_expansion

    tn = read_network(_read_text(args.network))
    msgs, report = _converged_bp(tn, args)
    catalog, clusters, hit = load_or_build(tn.graph, args.max_weight, None, args.cache)
    log.info("catalog: %d loops, %d clusters (cache hit: %s)", len(catalog), len(clusters), hit)
    ledger = cluster_expansion(
        tn, msgs, catalog, clusters, args.max_weight,
        with_loop_series=args.loop_series, threads=args.threads,
    )
    text = ledger.to_csv(config.csv_header())
    if args.out:
        config.echo(args.out)
        (Path(args.out) / "expansion.csv").write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_ising_benchmark(args, config: RunConfig) -> int:
    from . import ising

    if any(L < 3 for L in args.L):
        raise argparse.ArgumentTypeError("--L values must be >= 3")
    betas = ising.beta_grid(args.beta_min, args.beta_max, args.beta_steps)
    out = Path(args.out)
    config.echo(out)
    points = ising.benchmark_sweep(
        betas, args.L, args.max_weight, threads=args.threads,
        cache_dir=args.cache, loop_series=not args.no_loop_series,
    )
    header = config.csv_header()
    (out / "benchmark.csv").write_text(ising.benchmark_csv(points, header))
    (out / "loops.csv").write_text(ising.loops_csv(points, header))
    if args.diagnostics:
        (out / "diagnostics.csv").write_text(_diagnostics_csv(args, betas, header))
    flagged = sum(1 for p in points if not p.rows[0].bp_converged)
    if flagged:
        log.warning("%d sweep points did not converge; they are flagged in benchmark.csv", flagged)
    log.info("wrote %s", out)
    return EXIT_OK


def _diagnostics_csv(args, betas, header: str) -> str:
    import csv
    import io
    import math

    import numpy as np

    from . import ising
    from .errors import BPNotConvergedError
    from .graph import bfs_distances

    buf = io.StringIO()
    buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "beta", "L", "key", "distance", "value", "stable"])
    thetas = np.linspace(-math.pi / 2, math.pi / 2, 181)
    for beta in betas:
        samples, fixed = ising.fixed_point_energy_scan(beta, thetas)
        for th, e in samples:
            w.writerow(["energy", f"{beta:.17g}", "", f"{th:.17g}", "", f"{e:.17g}", ""])
        for fp in fixed:
            w.writerow([
                "fixed_point", f"{beta:.17g}", "", f"{fp.theta:.17g}", "",
                f"{fp.energy:.17g}", int(fp.stable),
            ])
    for L in sorted(set(args.L)):
        g, _ = ising.ising_lattice(ising.IsingSpec(L, 0.0))
        dist = bfs_distances(g, 0)
        for beta in betas:
            try:
                delta = ising.message_perturbation_response(ising.IsingSpec(L, beta), 0, args.field)
            except BPNotConvergedError as exc:
                log.warning("response run at beta=%g, L=%d: %s", beta, L, exc)
                continue
            for e, d in sorted(delta.items()):
                a, b = g.edges[e]
                w.writerow([
                    "response", f"{beta:.17g}", L, e, min(dist[a], dist[b]), f"{d:.17g}", "",
                ])
    return buf.getvalue()


def cmd_lattice(args, config: RunConfig) -> int:
    from .graph import build_square_lattice, format_graph

    g, _ = build_square_lattice(args.L, not args.open)
    Path(args.out).write_text(format_graph(g))
    return EXIT_OK


def cmd_ising_network(args, config: RunConfig) -> int:
    from .ising import IsingSpec, build_ising_network
    from .network import format_network

    tn = build_ising_network(IsingSpec(args.L, args.beta, periodic=not args.open))
    Path(args.out).write_text(format_network(tn))
    return EXIT_OK


COMMANDS = {
    "contract": cmd_contract,
    "enumerate": cmd_enumerate,
    "expand": cmd_expand,
    "ising-benchmark": cmd_ising_benchmark,
    "lattice": cmd_lattice,
    "ising-network": cmd_ising_network,
}


_IO_KEYS = ("out", "cache", "threads", "verbose")


def _config_from(args) -> RunConfig:
    items = {k: v for k, v in sorted(vars(args).items()) if k != "subcommand"}
    io = {k: items.pop(k) for k in _IO_KEYS if k in items}
    return RunConfig(args.subcommand, items, io)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    config = _config_from(args)
    try:
        return COMMANDS[args.subcommand](args, config)
    except argparse.ArgumentTypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, GraphError, TensorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
