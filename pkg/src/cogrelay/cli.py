"""Command-line front end.

    cogrelay select-relay --config relay.json --seeds 10
    cogrelay share        --config instance.json --seed-list 1,2,3 --method both
    cogrelay sweep        --config sweep.json --seeds 50 --links 2,4,6,8,10 --gamma-db 6,8,10,12,14
    cogrelay simulate     --config sim.json --seeds 20 --out metrics.csv
    cogrelay compare      --config sim.json --seeds 5 --policy clsss,static-random

Every row carries the seed and a hash of the resolved configuration, so any
row can be regenerated on its own. Failures print one JSON error record on
stderr and exit non-zero (2 for usage/config problems, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from functools import partial

import numpy as np

from cogrelay import netsim, sharing
from cogrelay.channel import db_to_linear, linear_to_db, sample_channel
from cogrelay.config import (
    ConfigError,
    Document,
    generator_params,
    load_document,
    parse_instance,
    parse_pso,
    parse_relay,
    parse_sim,
    sim_extras,
)
from cogrelay.relay import select_best_relay
from cogrelay.reporting import ResultTable, config_hash
from cogrelay.swarm import optimize

COMMANDS = ("select-relay", "share", "simulate", "sweep", "compare")
DEFAULT_LINKS = (2, 4, 6, 8, 10)
DEFAULT_GAMMA_DB = (6.0, 8.0, 10.0, 12.0, 14.0)
DEFAULT_NODE_LEVELS = (20, 40, 60, 80, 100)
METRIC_COLUMNS = [
    "delay_ms",
    "throughput_kbps",
    "pdr",
    "overhead",
    "energy_j",
    "generated",
    "delivered",
    "dropped",
    "queueing_delay_ms",
    "service_delay_ms",
]


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_path: str | None
    seeds: tuple[int, ...]
    output_path: str | None = None
    output_format: str = "csv"
    jobs: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if not self.seeds:
            raise UsageError("seed list must be non-empty")
        if self.output_format not in ("csv", "json"):
            raise UsageError(f"output format must be csv or json, got {self.output_format!r}")

    def document(self) -> Document:
        if self.config_path is None:
            return Document({}, "", "<defaults>")
        return load_document(self.config_path)


def _ids(ids) -> str:
    return "[" + ",".join(str(i) for i in ids) + "]"


def _floats(values) -> str:
    return "[" + ",".join(repr(float(v)) for v in values) + "]"


def _map(fn, items, jobs: int):
    """Ordered map; results come back in input order whatever the completion order."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- select-relay -------------------------------------------------------------


def run_select_relay(manifest: RunManifest) -> ResultTable:
    doc = manifest.document()
    cfg, m = parse_relay(doc)
    h = config_hash({"command": "select-relay", "config": doc.data})
    table = ResultTable(
        [
            "seed",
            "relay_count",
            "best",
            "fallback",
            "candidate_set",
            "optimal_set",
            "snr_source_relay",
            "snr_relay_dest",
            "snr_equivalent",
            "config_hash",
        ],
        provenance=f"config={h} seeds={_ids(manifest.seeds)}",
    )
    for seed in manifest.seeds:
        d = select_best_relay(sample_channel(m, seed), cfg)
        cands = d.all_candidates
        table.add(
            [
                seed,
                m,
                "" if d.best is None else d.best,
                int(d.used_fallback),
                _ids(d.candidate_set),
                _ids(d.optimal_set),
                _floats(c.snr_source_relay for c in cands),
                _floats(c.snr_relay_dest for c in cands),
                _floats(c.snr_equivalent for c in cands),
                h,
            ]
        )
    return table


# -- share --------------------------------------------------------------------


def _share_one(seed, doc_data, doc_text, method):
    doc = Document(doc_data, doc_text)
    params = generator_params(doc)
    if params is None:
        inst = parse_instance(doc)
    else:
        inst = sharing.random_instance(seed, **params)
    methods = ["exact", "pso"] if method == "both" else [method]
    if "exact" in methods and inst.n_secondary > sharing.MAX_BRUTE_FORCE_LINKS:
        if method == "exact":
            raise UsageError(f"exact search is limited to {sharing.MAX_BRUTE_FORCE_LINKS} secondary links")
        methods.remove("exact")
    out = []
    for meth in methods:
        if meth == "exact":
            sol = sharing.brute_force_optimum(inst)
        elif inst.n_secondary == 0:
            sol = sharing.solution_for(inst, sharing.ActivationVector(()))
        else:
            sol = optimize(inst, parse_pso(doc, seed=seed))
        out.append((meth, inst, sol))
    return out


def run_share(manifest: RunManifest, method: str | None = None) -> ResultTable:
    doc = manifest.document()
    generator_params(doc)  # validate keys early
    method = method or doc.data.get("method", "both")
    if method not in ("exact", "pso", "both"):
        raise UsageError(f"method must be exact, pso or both, got {method!r}")
    h = config_hash({"command": "share", "config": doc.data, "method": method})
    table = ResultTable(
        [
            "seed",
            "method",
            "primary_links",
            "secondary_links",
            "sinr_floor_db",
            "objective_bps",
            "feasible",
            "activation",
            "active_links",
            "config_hash",
        ],
        provenance=f"config={h} seeds={_ids(manifest.seeds)}",
    )
    work = partial(_share_one, doc_data=doc.data, doc_text=doc.text, method=method)
    for seed, results in zip(manifest.seeds, _map(work, manifest.seeds, manifest.jobs)):
        for meth, inst, sol in results:
            floor_db = float(linear_to_db(inst.sinr_floor)) if inst.sinr_floor > 0 else ""
            table.add(
                [
                    seed,
                    meth,
                    inst.n_primary,
                    inst.n_secondary,
                    floor_db,
                    sol.objective,
                    int(sol.feasible),
                    _ids(sol.activation.bits),
                    sum(sol.activation.bits),
                    h,
                ]
            )
    return table


# -- sweep --------------------------------------------------------------------


def sweep_values(params: dict, link_counts, gamma_db, seed: int, method: str = "exact", pso_doc=None) -> np.ndarray:
    """Optimum objective for one seed over the (links x gamma) grid.

    All cells share the seed's geometry; a cell with k links uses the first k
    secondary links, so larger cells contain the smaller ones.
    """
    params = dict(params)
    params["secondary_count"] = max(link_counts)
    base = sharing.random_instance(seed, **params)
    out = np.empty((len(link_counts), len(gamma_db)))
    for a, k in enumerate(link_counts):
        sub = base.with_secondary_prefix(k)
        for b, g in enumerate(gamma_db):
            inst = sub.with_sinr_floor(db_to_linear(g))
            if method == "exact":
                sol = sharing.brute_force_optimum(inst)
            elif k == 0:
                sol = sharing.solution_for(inst, sharing.ActivationVector(()))
            else:
                sol = optimize(inst, parse_pso(pso_doc or Document({}), seed=seed))
            out[a, b] = sol.objective
    return out


def _sweep_one(seed, params, links, gammas, method, doc_data):
    return sweep_values(params, links, gammas, seed, method, Document(doc_data))


def run_share_sweep(manifest: RunManifest, link_counts=DEFAULT_LINKS, gamma_db=DEFAULT_GAMMA_DB, method="exact") -> ResultTable:
    link_counts, gamma_db = list(link_counts), [float(g) for g in gamma_db]
    if not link_counts or not gamma_db:
        raise UsageError("--links and --gamma-db must be non-empty")
    if any(k < 0 for k in link_counts):
        raise UsageError("link counts must be >= 0")
    if method == "exact" and max(link_counts) > sharing.MAX_BRUTE_FORCE_LINKS:
        raise UsageError(f"exact sweep is limited to {sharing.MAX_BRUTE_FORCE_LINKS} links")
    doc = manifest.document()
    params = generator_params(doc)
    if params is None:
        params = generator_params(Document({"random": {}, **{k: v for k, v in doc.data.items() if k != "method"}}))
    h = config_hash(
        {"command": "sweep", "config": doc.data, "links": link_counts, "gamma_db": gamma_db, "method": method}
    )
    work = partial(_sweep_one, params=params, links=link_counts, gammas=gamma_db, method=method, doc_data=doc.data)
    grids = np.stack(_map(work, manifest.seeds, manifest.jobs))
    mean = grids.mean(axis=0)
    table = ResultTable(
        ["links"] + [f"gamma_{g:g}db" for g in gamma_db] + ["method", "seeds", "config_hash"],
        provenance=f"config={h} seeds={_ids(manifest.seeds)}",
    )
    for a, k in enumerate(link_counts):
        table.add([k] + [float(v) for v in mean[a]] + [method, _ids(manifest.seeds), h])
    return table


# -- simulate / compare -------------------------------------------------------


def _metric_cells(m: netsim.SimMetrics) -> list:
    return [
        m.mean_delay,
        m.throughput,
        m.pdr,
        m.overhead,
        m.energy_consumed,
        m.generated,
        m.delivered,
        m.dropped,
        m.mean_queueing_delay,
        m.mean_service_delay,
    ]


def _simulate_one(cfg: netsim.SimConfig, trace: bool = False):
    if trace:
        metrics, world = netsim.run(cfg, trace=True, return_world=True)
        return metrics, world.trace
    return netsim.run(cfg), None


def run_simulate(manifest: RunManifest, trace_path: str | None = None, policy: str | None = None) -> ResultTable:
    doc = manifest.document()
    base = parse_sim(doc, **({"policy": policy} if policy else {}))
    h = config_hash({"command": "simulate", "config": _cfg_dict(base, drop_seed=True)})
    table = ResultTable(
        ["seed", "policy", "nodes"] + METRIC_COLUMNS + ["config_hash"],
        provenance=f"config={h} seeds={_ids(manifest.seeds)}",
    )
    cfgs = [replace(base, seed=s) for s in manifest.seeds]
    results = _map(partial(_simulate_one, trace=trace_path is not None), cfgs, manifest.jobs)
    trace_lines = []
    for cfg, (metrics, trace) in zip(cfgs, results):
        table.add([cfg.seed, cfg.policy, cfg.node_count] + _metric_cells(metrics) + [h])
        for rec in trace or []:
            trace_lines.append(json.dumps({"seed": cfg.seed, **rec}, sort_keys=True))
    if trace_path is not None:
        with open(trace_path, "w") as fh:
            fh.write("".join(line + "\n" for line in trace_lines))
    return table


def run_compare(manifest: RunManifest, policies=None, node_levels=None) -> ResultTable:
    doc = manifest.document()
    extras = sim_extras(doc)
    policies = list(policies or extras.get("policies") or netsim.POLICIES)
    node_levels = list(node_levels or extras.get("node_levels") or DEFAULT_NODE_LEVELS)
    if len(policies) < 2:
        raise UsageError("compare needs at least two policies")
    for p in policies:
        if p not in netsim.POLICIES:
            raise UsageError(f"unknown policy {p!r}; expected one of {netsim.POLICIES}")
    base = parse_sim(doc)
    cells = [(n, p) for n in node_levels for p in policies]
    cfgs = []
    for n, p in cells:
        try:
            cell_cfg = replace(base, node_count=n, policy=p)
        except ConfigError as e:
            raise UsageError(f"node level {n}: {e}") from e
        cfgs.extend(replace(cell_cfg, seed=s) for s in manifest.seeds)
    h = config_hash(
        {
            "command": "compare",
            "config": _cfg_dict(base, drop_seed=True),
            "policies": policies,
            "node_levels": node_levels,
        }
    )
    table = ResultTable(
        ["nodes", "policy", "seed"] + METRIC_COLUMNS + ["config_hash"],
        provenance=f"config={h} seeds={_ids(manifest.seeds)}",
    )
    results = _map(_simulate_one, cfgs, manifest.jobs)
    for cfg, (metrics, _) in zip(cfgs, results):
        table.add([cfg.node_count, cfg.policy, cfg.seed] + _metric_cells(metrics) + [h])
    return table


def _cfg_dict(cfg: netsim.SimConfig, drop_seed: bool = False) -> dict:
    d = asdict(cfg)
    if drop_seed:
        d.pop("seed")
    return d


# -- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cogrelay", description="Cognitive radio relay selection, spectrum sharing and simulation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="JSON configuration document")
        seeds = p.add_mutually_exclusive_group(required=True)
        seeds.add_argument("--seeds", type=int, metavar="N", help="use seeds 0..N-1")
        seeds.add_argument("--seed-list", type=_int_list, metavar="a,b,c", help="explicit seeds")
        p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for independent seeds")
        return p

    common(sub.add_parser("select-relay", help="best-relay decision per seed"))
    share = common(sub.add_parser("share", help="optimise secondary link activation"))
    share.add_argument("--method", choices=("exact", "pso", "both"))
    sweep = common(sub.add_parser("sweep", help="mean optimum over a links x SINR-floor grid"))
    sweep.add_argument("--links", type=_int_list, default=list(DEFAULT_LINKS))
    sweep.add_argument("--gamma-db", type=_float_list, default=list(DEFAULT_GAMMA_DB))
    sweep.add_argument("--method", choices=("exact", "pso"), default="exact")
    sim = common(sub.add_parser("simulate", help="network simulation, one row per seed"))
    sim.add_argument("--trace", metavar="PATH", help="write per-packet events as JSON lines")
    sim.add_argument("--policy", type=_str_list, help="override the configured policy")
    cmp_ = common(sub.add_parser("compare", help="policy comparison across node counts"))
    cmp_.add_argument("--policy", type=_str_list, help="policies to compare")
    cmp_.add_argument("--nodes", type=_int_list, help="node-count levels")
    return parser


def _manifest(args) -> RunManifest:
    if args.seeds is not None:
        if args.seeds < 1:
            raise UsageError("--seeds must be >= 1")
        seeds = tuple(range(args.seeds))
    else:
        seeds = tuple(args.seed_list)
    return RunManifest(args.command, args.config, seeds, args.out, args.format, max(1, args.jobs))


def execute(argv=None) -> ResultTable:
    args = build_parser().parse_args(argv)
    manifest = _manifest(args)
    if args.command == "select-relay":
        table = run_select_relay(manifest)
    elif args.command == "share":
        table = run_share(manifest, args.method)
    elif args.command == "sweep":
        table = run_share_sweep(manifest, args.links, args.gamma_db, args.method)
    elif args.command == "simulate":
        if args.policy:
            if len(args.policy) != 1:
                raise UsageError("simulate takes a single --policy")
        table = run_simulate(manifest, args.trace, args.policy[0] if args.policy else None)
    else:
        table = run_compare(manifest, args.policy, args.nodes)
    text = table.render(manifest.output_format)
    if manifest.output_path:
        with open(manifest.output_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return table


def _error_record(exc: Exception) -> dict:
    rec = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("path", "line", "field"):
        value = getattr(exc, attr, None)
        if value is not None:
            rec[attr] = value
    return rec


def main(argv=None) -> int:
    try:
        execute(argv)
    except (UsageError, ConfigError) as e:
        sys.stderr.write(json.dumps(_error_record(e)) + "\n")
        return 2
    except Exception as e:  # noqa: BLE001 - any failure must still yield an error record
        sys.stderr.write(json.dumps(_error_record(e)) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
