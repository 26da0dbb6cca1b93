"""Command-line entry point: gen, train, plan, simulate, sweep, compare, serve."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import workloads
from .config import load_config, resolve_profile
from .domain import EngineConfig, FleetConfig
from .errors import PlannerError
from .forest import Hyper, ModelStore, augment, train
from .history import TraceDataset
from .simulator import Policy, PolicyKind, QuerySpec, simulate, sweep, sweep_csv

log = logging.getLogger("hybridplan")

DEFAULT_MODEL_DIR = "model"
DEFAULT_HISTORY = "history.jsonl"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # One line on stderr, like every other failure.
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(2)


def _fleet(text: str) -> FleetConfig:
    try:
        a, b = text.split(",")
        return FleetConfig(int(a), int(b))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N_VM,N_SL, got {text!r}") from None


def _engine_config(args) -> EngineConfig:
    return load_config(args.config) if getattr(args, "config", None) else EngineConfig()


def _profile(args):
    return resolve_profile(args.profile or _engine_config(args).compute_provider)


def _policy(name: str, timeout: float) -> Policy:
    kinds = {
        "relay": PolicyKind.HYBRID_RELAY, "keep": PolicyKind.HYBRID_KEEP, "segue": PolicyKind.SEGUE_STATIC,
        "sl-only": PolicyKind.SL_ONLY, "vm-only": PolicyKind.VM_ONLY,
    }
    kind = kinds[name]
    return Policy(kind, timeout if kind is PolicyKind.SEGUE_STATIC else 0.0)


def _write(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    profile = _profile(args)
    relay = _engine_config(args).compute_relay
    catalog = workloads.catalog_by_id()
    classes = [catalog[q] for q in args.queries.split(",")] if args.queries else list(workloads.CATALOG)
    samples = workloads.generate(profile, classes, args.n_fleets, args.max_vm, args.max_sl, args.seed, relay)
    out = Path(args.history)
    if out.exists() and not args.append:
        out.unlink()
    TraceDataset(out).extend(samples)
    print(f"wrote {len(samples)} samples to {out}")
    return 0


def cmd_train(args) -> int:
    samples = TraceDataset(args.history).read_all()
    if not samples:
        raise PlannerError(f"no samples in {args.history}")
    aug = augment(samples, args.factor, args.jitter, args.seed)
    hyper = Hyper(args.n_trees, args.max_depth, args.min_leaf, args.seed)
    registry = workloads.registry_for([q for q in workloads.CATALOG if any(s.query_id == q.query_id for s in samples)])
    store = ModelStore(args.model_dir)
    prev = store.current_version() or 0
    model, report = train(aug, args.split, hyper, args.window, known_queries=registry)
    model = type(model)(model.trees, model.feature_order, model.training_stats, model.known_queries, prev + 1)
    store.save(model)
    (Path(args.model_dir) / "registry.json").write_text(json.dumps(registry, indent=2, sort_keys=True))
    print(f"samples={len(samples)} augmented={len(aug)} train={report.n_train} test={report.n_test}")
    print(f"rmse={report.rmse:.3f} within_{report.window_s:g}s={report.within_window_accuracy:.3f} "
          f"model_version={model.version}")
    return 0


def _plan_payload(args) -> dict:
    payload = {"seed": args.seed, "n_map_tasks": args.n_map_tasks}
    if args.query_id:
        payload["query_id"] = args.query_id
    else:
        payload["query_text"] = args.sql
    if args.input_size is not None:
        payload["input_size_bytes"] = args.input_size
    if args.epsilon is not None:
        payload["epsilon"] = args.epsilon
    return payload


def cmd_plan(args) -> int:
    if bool(args.query_id) == bool(args.sql):
        raise PlannerError("give exactly one of --query-id and --sql")
    payload = _plan_payload(args)
    if args.connect:
        from .service.lineproto import LineClient

        host, _, port = args.connect.rpartition(":")
        with LineClient(host or "127.0.0.1", int(port)) as client:
            result = client.call("plan", payload)
    else:
        from .service.core import PlannerService

        service = PlannerService.from_paths(args.model_dir, args.history, _profile(args), args.config)
        result = service.plan(payload)
    if args.json:
        print(json.dumps(result, sort_keys=True))
        return 0
    f = result["fleet"]
    print(f"fleet=({f['n_vm']},{f['n_sl']}) matched={result['matched_query_id']} "
          f"similarity={result['similarity_score']:.4f}")
    print(f"T_best={result['t_best_s']:.3f}s T_est={result['predicted_time_s']:.3f}s "
          f"C_best={result['c_best']} est_cost={result['estimated_cost']}")
    print(f"evaluations={result['search_evaluations']} terminated_by={result['terminated_by']} "
          f"model_version={result['model_version']}")
    return 0


def cmd_simulate(args) -> int:
    profile = _profile(args)
    policy = _policy(args.policy, args.segue_timeout)
    out = simulate(QuerySpec(args.n_tasks, args.task_service, args.slots), args.fleet, policy, profile)
    print(f"fleet={args.fleet} policy={policy.kind.value} completion_s={out.completion_s:.3f}")
    print(f"tasks_on_vm={out.tasks_on_vm} tasks_on_sl={out.tasks_on_sl} "
          f"sl_busy_s={out.sl_busy_seconds:.3f} vm_billed_s={out.vm_billed_seconds:.0f}")
    print(" ".join(f"{k}={v}" for k, v in out.cost.as_dict().items()))
    for sl, vm in out.relay_map.items():
        print(f"relay {sl} -> {vm}")
    return 0


def cmd_sweep(args) -> int:
    profile = _profile(args)
    rows = sweep(QuerySpec(args.n_tasks, args.task_service, args.slots), profile,
                 _policy(args.policy, args.segue_timeout), args.max_vm, args.max_sl)
    _write(sweep_csv(rows), args.out)
    return 0


def cmd_compare(args) -> int:
    from .compare import COMPARE_HEADER, compare

    profile = _profile(args)
    if args.max_vm is not None or args.max_sl is not None:
        profile = profile.with_bounds(args.max_vm or profile.max_vm, args.max_sl or profile.max_sl)
    model = ModelStore(args.model_dir).load()
    qc = workloads.catalog_by_id().get(args.query_id)
    if qc is None:
        raise PlannerError(f"unknown catalog query {args.query_id!r}")
    relay = _engine_config(args).compute_relay
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(("seed",) + COMPARE_HEADER)
    for seed in range(args.seed, args.seed + args.runs):
        state = workloads.cluster_state(np.random.default_rng(seed))
        base = workloads.make_features(qc, FleetConfig(1, 1), state)
        for row in compare(model, base, qc.spec(), profile, seed=seed, relay=relay):
            writer.writerow([seed] + row.row())
    return 0


def cmd_serve(args) -> int:
    from .service.core import PlannerService

    service = PlannerService.from_paths(args.model_dir, args.history, _profile(args), args.config)
    if args.http:
        import uvicorn

        from .service.app import create_app

        uvicorn.run(create_app(service), host=args.host, port=args.port, log_level="info")
        return 0
    from .service.lineproto import LineServer

    with LineServer(service, args.host, args.port) as server:
        print(f"listening on {args.host}:{server.port}", flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hybridplan", description="Hybrid VM/serverless fleet planner.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, model=False, history=False):
        sp.add_argument("--profile", help="bundled profile name (aws-sim, gcp-sim) or a profile file")
        sp.add_argument("--config", help="smartpick.* properties file")
        sp.add_argument("--seed", type=int, default=0)
        if model:
            sp.add_argument("--model-dir", default=DEFAULT_MODEL_DIR)
        if history:
            sp.add_argument("--history", default=DEFAULT_HISTORY)

    def query(sp, n_tasks=100):
        sp.add_argument("--n-tasks", type=int, default=n_tasks)
        sp.add_argument("--task-service", type=float, default=2.0, help="seconds per task on a VM slot")
        sp.add_argument("--slots", type=int, default=1, help="slots per instance")
        sp.add_argument("--policy", choices=["relay", "keep", "segue", "sl-only", "vm-only"], default="relay")
        sp.add_argument("--segue-timeout", type=float, default=90.0)

    sp = sub.add_parser("gen", help="simulate query classes on random fleets into a history file")
    common(sp, history=True)
    sp.add_argument("--queries", help="comma-separated catalog ids (default: all)")
    sp.add_argument("--n-fleets", type=int, default=20)
    sp.add_argument("--max-vm", type=int)
    sp.add_argument("--max-sl", type=int)
    sp.add_argument("--append", action="store_true", help="append instead of overwriting")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("train", help="augment history, train the forest and persist it")
    common(sp, model=True, history=True)
    sp.add_argument("--factor", type=int, default=10)
    sp.add_argument("--jitter", type=float, default=0.05)
    sp.add_argument("--split", type=float, default=0.8)
    sp.add_argument("--window", type=float, default=10.0)
    sp.add_argument("--n-trees", type=int, default=100)
    sp.add_argument("--max-depth", type=int, default=12)
    sp.add_argument("--min-leaf", type=int, default=2)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("plan", help="choose a fleet for a known or alien query")
    common(sp, model=True, history=True)
    sp.add_argument("--query-id")
    sp.add_argument("--sql", help="query text for an alien query")
    sp.add_argument("--n-map-tasks", type=int, default=0)
    sp.add_argument("--input-size", type=float, help="input size in bytes")
    sp.add_argument("--epsilon", type=float, help="knob override")
    sp.add_argument("--connect", help="HOST:PORT of a running line-protocol server")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("simulate", help="simulate one fleet under one policy")
    common(sp)
    query(sp)
    sp.add_argument("--fleet", type=_fleet, required=True, help="N_VM,N_SL")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="simulate every fleet of a grid and emit CSV")
    common(sp)
    query(sp)
    sp.add_argument("--max-vm", type=int, default=5)
    sp.add_argument("--max-sl", type=int, default=5)
    sp.add_argument("--out", help="CSV path (default stdout)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("compare", help="PC_r of RF+BO, RF-exhaustive and BO-on-simulator")
    common(sp, model=True)
    sp.add_argument("--query-id", default="q11")
    sp.add_argument("--runs", type=int, default=1, help="number of consecutive seeds")
    sp.add_argument("--max-vm", type=int)
    sp.add_argument("--max-sl", type=int)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("serve", help="run the planner as a long-lived service")
    common(sp, model=True, history=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=7070)
    sp.add_argument("--http", action="store_true", help="serve the HTTP API instead of the line protocol")
    sp.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PlannerError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        sys.stderr.write(f"hybridplan {args.command}: error: {msg}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
