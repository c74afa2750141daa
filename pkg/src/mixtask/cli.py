"""Command-line entry points: run / suite / replay / serve."""

from __future__ import annotations

import argparse
import json
import sys

from .llm import AdapterConfig
from .logs import load_log, save_log
from .suite import SuiteGrid, run_suite
from .trial import TrialConfig, replay_check, run_trial


def _adapter_from_args(args) -> AdapterConfig:
    if getattr(args, "llm_config", None):
        return AdapterConfig.from_file(args.llm_config)
    if not getattr(args, "llm_endpoint", None):
        return AdapterConfig.disabled()
    capabilities = frozenset(
        c.strip() for c in (args.llm_capabilities or "").split(",") if c.strip()
    ) or frozenset({"classify", "sentiment", "realize", "strategy", "allocate"})
    return AdapterConfig(
        endpoint=args.llm_endpoint,
        model=args.llm_model or "",
        capabilities=capabilities,
    )


def cmd_run(args) -> int:
    script = None
    if args.script:
        with open(args.script) as fh:
            script = fh.read()
    config = TrialConfig(
        scenario=args.scenario,
        method=args.method,
        human_p=args.human_p,
        mood=args.mood,
        human_script=script,
        alpha=args.alpha,
        seed=args.seed,
        recb_p=args.recb_p,
        q_samples=args.q_samples,
        qtable_path=args.qtable,
        adapter=_adapter_from_args(args),
    )
    metrics, log = run_trial(config)
    if args.out:
        from .server import build_snapshot
        from .trial import _load

        scenario = _load(config)
        snapshot = build_snapshot(scenario, config.method, config.alpha)
        save_log(args.out, config.to_dict(), log, snapshot=snapshot)
    print(json.dumps(metrics.to_dict(), indent=2, sort_keys=True))
    return 0 if metrics.full_success else 1


def cmd_suite(args) -> int:
    grid = SuiteGrid.from_file(args.grid_file)
    results = run_suite(grid, out_dir=args.out_dir, jobs=args.jobs)
    errors = sum(len(r.errors) for r in results)
    print(f"wrote {args.out_dir}/report.csv ({len(results)} cells, {errors} trial errors)")
    return 0


def cmd_replay(args) -> int:
    header, log = load_log(args.log)
    config = header.get("config", {})
    reason = log.termination_reason()
    for rec in log.records:
        if rec.kind == "verbal":
            print(f"[{rec.env_step:3d}] {rec.actor} {rec.payload['act']}: {rec.payload['text']}")
        elif rec.kind == "physical":
            ok = rec.payload.get("succeeded", True)
            print(
                f"[{rec.env_step:3d}] {rec.actor} does step {rec.payload['step']} "
                f"{rec.payload['primitive']} {'ok' if ok else 'FAILED'}"
            )
        elif rec.kind == "phelp":
            print(f"[{rec.env_step:3d}] p_help -> {rec.payload['value']:.3f}")
    print(f"terminated: {reason}")
    if args.check:
        same = replay_check(config, log)
        print("replay check:", "byte-identical" if same else "MISMATCH")
        return 0 if same else 1
    return 0


def cmd_serve(args) -> int:
    from .server import serve  # deferred: pulls in threading/http machinery

    config = TrialConfig(
        scenario=args.scenario,
        method=args.method,
        alpha=args.alpha,
        seed=args.seed,
        adapter=_adapter_from_args(args),
    )
    server, session = serve(
        config, args.port, turn_timeout_s=args.turn_timeout, static_dir=args.static
    )
    print(f"live session on http://127.0.0.1:{args.port} (scenario={args.scenario})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        session.human.close()
        server.shutdown()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixtask")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one trial")
    run_p.add_argument("--scenario", default="pour_package")
    run_p.add_argument("--method", default="mixed_init")
    run_p.add_argument("--human-p", dest="human_p", type=float, default=1.0)
    run_p.add_argument("--mood", choices=("positive", "negative"), default="positive")
    run_p.add_argument("--alpha", type=float, default=10.0)
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--script", help="fixture-human script file")
    run_p.add_argument("--recb-p", dest="recb_p", type=float, default=0.5)
    run_p.add_argument("--q-samples", dest="q_samples", type=int, default=100)
    run_p.add_argument("--qtable", help="pre-built cost table file")
    run_p.add_argument("--out", help="write the trial log here")
    run_p.add_argument("--llm-endpoint", dest="llm_endpoint")
    run_p.add_argument("--llm-model", dest="llm_model")
    run_p.add_argument("--llm-capabilities", dest="llm_capabilities")
    run_p.add_argument("--llm-config", dest="llm_config", help="adapter config JSON file")
    run_p.set_defaults(fn=cmd_run)

    suite_p = sub.add_parser("suite", help="run an experiment grid")
    suite_p.add_argument("--grid-file", required=True)
    suite_p.add_argument("--out-dir", required=True)
    suite_p.add_argument("--jobs", type=int, default=1)
    suite_p.set_defaults(fn=cmd_suite)

    replay_p = sub.add_parser("replay", help="print a logged trial")
    replay_p.add_argument("--log", required=True)
    replay_p.add_argument("--check", action="store_true", help="re-run and byte-compare")
    replay_p.set_defaults(fn=cmd_replay)

    serve_p = sub.add_parser("serve", help="host a live interactive session")
    serve_p.add_argument("--port", type=int, default=8765)
    serve_p.add_argument("--scenario", default="pour_package")
    serve_p.add_argument("--method", default="mixed_init")
    serve_p.add_argument("--alpha", type=float, default=10.0)
    serve_p.add_argument("--seed", type=int, default=0)
    serve_p.add_argument("--turn-timeout", dest="turn_timeout", type=float, default=120.0)
    serve_p.add_argument("--static", help="directory of web-client assets to serve")
    serve_p.add_argument("--llm-endpoint", dest="llm_endpoint")
    serve_p.add_argument("--llm-model", dest="llm_model")
    serve_p.add_argument("--llm-capabilities", dest="llm_capabilities")
    serve_p.add_argument("--llm-config", dest="llm_config", help="adapter config JSON file")
    serve_p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
