"""Command-line entry point: route, eval, train-sim, cotool-demo, serve."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .core import ConfigError, GatewayConfig, Query, default_config, load_config


def _config(args: argparse.Namespace) -> GatewayConfig:
    return load_config(args.config) if args.config else default_config()


def _clients(args: argparse.Namespace):
    from .gateway import GatewayClients, mock_clients

    if args.mock:
        return mock_clients(args.mock_script)
    return GatewayClients()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    else:
        print(text)


def cmd_route(args: argparse.Namespace) -> int:
    from .gateway import route_query

    trace = route_query(Query(args.id, args.query), _config(args), _clients(args))
    _emit(json.dumps(trace.to_dict(), indent=2, ensure_ascii=False), args.out)
    return 1 if trace.failed else 0


def cmd_eval(args: argparse.Namespace) -> int:
    from .gateway import evaluate_run, load_dataset, route_query

    dataset = load_dataset(args.dataset)
    config, clients = _config(args), _clients(args)
    traces = [route_query(q, config, clients) for q in dataset]
    report = evaluate_run(dataset, traces)
    as_csv = args.format == "csv" or (args.out and args.out.endswith(".csv"))
    _emit(report.to_csv() if as_csv else report.to_json(), args.out)
    if args.traces:
        Path(args.traces).write_text(
            "".join(json.dumps(t.to_dict(), ensure_ascii=False) + "\n" for t in traces), encoding="utf-8")
    return 0


def cmd_train_sim(args: argparse.Namespace) -> int:
    from .grpo import SimEnvSpec, TrainConfig, evaluate_greedy, train_router

    env = SimEnvSpec.separable(feature_dim=args.dim, noise_sigma=args.noise, seed=args.seed)
    config = TrainConfig(iterations=args.iterations, seed=args.seed,
                         hierarchy_weight=0.0 if args.no_hierarchy else 1.0)
    result = train_router(env, config)
    out = args.out or f"curve_seed{args.seed}.csv"
    result.write_curve_csv(out)
    report = evaluate_greedy(result.params, env)
    if args.params_out:
        result.params.save(args.params_out)
    print(json.dumps({"curve": out, "minimal_hit_rate": report.minimal_hit_rate,
                      "level_histogram": list(report.level_histogram), "n": report.n}))
    return 0


def cmd_cotool_demo(args: argparse.Namespace) -> int:
    from .cotool import CoToolLimits, JsonlTraceSink, ScriptedGenerator, run_batch, script_from_dict
    from .gateway.mock import data_path, load_script
    from .rstkit import FixtureTransport, default_registry, make_dispatcher

    script = load_script(args.mock_script)
    scripts = {q: script_from_dict(s) for q, s in script.get("cotool", {}).items()}
    if not scripts:
        raise ValueError("script has no 'cotool' entries")
    dispatcher = make_dispatcher(default_registry(FixtureTransport.from_file(data_path("wiki_fixture.json"))))
    limits = CoToolLimits(max_tool_calls=args.max_tool_calls, max_turn=args.max_turn)
    sink = JsonlTraceSink(sys.stderr) if args.trace else None
    states = run_batch(ScriptedGenerator(scripts), dispatcher, list(scripts), limits=limits, trace=sink)
    payload = [{"id": s.id, "status": s.status.value, "tool_calls": s.tool_calls, "turns": s.turns,
                "diagnostic": s.diagnostic, "generated": s.generated} for s in states]
    _emit(json.dumps(payload, indent=2, ensure_ascii=False), args.out)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .gateway import make_server

    server = make_server(_config(args), _clients(args), args.host, args.port)
    print(f"serving on {server.url}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="gateway config JSON (default: built-in local config)")
    common.add_argument("--mock", action="store_true", help="use scripted offline backends")
    common.add_argument("--mock-script", help="mock script JSON (default: bundled script)")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", help="write output here instead of stdout")

    parser = argparse.ArgumentParser(prog="elastic-gateway", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("route", parents=[common], help="route one query and print its trace")
    p.add_argument("query")
    p.add_argument("--id", default="q0")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("eval", parents=[common], help="route a dataset and print the cost report")
    p.add_argument("--dataset", required=True, help="JSON Lines {id, question, answer, task_kind}")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--traces", help="also write per-query traces as JSON Lines")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train-sim", parents=[common], help="train the router policy on the simulator")
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--no-hierarchy", action="store_true", help="drop the hierarchy reward term")
    p.add_argument("--params-out", help="save trained parameters as JSON")
    p.set_defaults(func=cmd_train_sim)

    p = sub.add_parser("cotool-demo", parents=[common], help="run the tool loop on scripted questions")
    p.add_argument("--max-tool-calls", type=int, default=4)
    p.add_argument("--max-turn", type=int, default=8)
    p.add_argument("--trace", action="store_true", help="log loop events to stderr as JSON Lines")
    p.set_defaults(func=cmd_cotool_demo)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
