"""Command line front door: REPL chat, scenario runner, model dumps, server."""

from __future__ import annotations

import argparse
import json
import sys
import uuid

from . import compiler, planner
from .catalog import to_document
from .config import Config, build_bundle, new_session
from .goals import Event
from .orchestrator import handle_event
from .scenario import run_scenario_file
from .service import state_document, trace_document

_SLASH_INTENTS = {"/why": "why", "/how": "how", "/chain": "chain"}


def _load_config(args: argparse.Namespace) -> Config:
    config = Config.from_file(args.config) if args.config else Config()
    if getattr(args, "mode", None):
        config.mode = args.mode
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config


def cmd_repl(args: argparse.Namespace) -> int:
    config = _load_config(args)
    session = new_session(config, uuid.uuid4().hex)
    print(f"session {session.id} (mode={config.mode}); /quit to exit, /help for commands")
    while True:
        try:
            line = input("you> ").strip()
        except (EOFError, KeyboardInterrupt):
            print()
            return 0
        if not line:
            continue
        if line in ("/quit", "/exit"):
            return 0
        if line == "/help":
            print("commands: /why <element>  /how <element>  /chain <element>  /summary")
            print("          /stop  /plan  /trace  /state  /quit")
            continue
        if line == "/plan":
            snapshot = session.plan_snapshots[-1] if session.plan_snapshots else None
            print(json.dumps(snapshot, indent=2))
            continue
        if line == "/trace":
            print(json.dumps(trace_document(session), indent=2))
            continue
        if line == "/state":
            print(json.dumps(state_document(session), indent=2))
            continue
        text = line
        for slash, keyword in _SLASH_INTENTS.items():
            if line.startswith(slash + " "):
                # rewrite to the natural phrasing the default rules recognise
                element = line[len(slash) + 1 :]
                text = {
                    "why": f"why did you need my {element}",
                    "how": f"how did you get my {element}",
                    "chain": f"why is my {element} what it is",
                }[keyword]
                break
        if line == "/summary":
            text = "summary"
        if line == "/stop":
            text = "stop"
        output = handle_event(session, Event(kind="utterance", text=text))
        if args.json:
            print(json.dumps(output.to_doc()))
        else:
            for message in output.messages:
                print(f"bot> {message}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = Config.from_file(args.config) if args.config else None
    exit_code = 0
    for path in args.scenario:
        report = run_scenario_file(path, config)
        if args.json:
            print(json.dumps(report.to_doc()))
        else:
            status = "PASS" if report.passed else "FAIL"
            print(f"[{status}] {report.name} ({len(report.steps)} steps, {report.duration:.2f}s)")
            for step in report.steps:
                if step.ok:
                    continue
                print(f"  step {step.index} ({step.send!r}):")
                for failure in step.failures:
                    print(f"    - {failure}")
                print(f"    reply was: {step.messages}")
        if not report.passed:
            exit_code = 1
            break
    return exit_code


def cmd_plan(args: argparse.Namespace) -> int:
    config = _load_config(args)
    bundle = build_bundle(config)
    goal = [g for g in (args.goal or "").split(",") if g]
    if not goal:
        print("plan needs --goal", file=sys.stderr)
        return 2
    known = [k for k in (args.known or "").split(",") if k]
    model = compiler.compile(
        bundle.catalog,
        bundle.ontology,
        ltm_known=known,
        goal=goal,
        slot_fill_cost=config.slot_fill_cost,
    )
    result = planner.plan(model)
    doc = {
        "goal": sorted(goal),
        "status": result.status,
        "plan": list(result.plan.steps) if result.plan is not None else None,
        "stats": {
            "expanded": result.stats.expanded,
            "generated": result.stats.generated,
            "time": result.stats.time,
        },
        "landmarks": planner.landmarks_to_doc(planner.extract_landmarks(model))
        if result.status == "plan"
        else None,
    }
    print(json.dumps(doc, indent=2))
    return 0


def cmd_dump(args: argparse.Namespace) -> int:
    config = _load_config(args)
    bundle = build_bundle(config)
    goal = [g for g in (args.goal or "").split(",") if g]
    if args.what == "catalog":
        print(json.dumps(to_document(bundle.ontology, bundle.catalog), indent=2))
        return 0
    model = compiler.compile(
        bundle.catalog,
        bundle.ontology,
        ltm_known=(),
        goal=goal,
        slot_fill_cost=config.slot_fill_cost,
    )
    if args.what == "model":
        if args.pddl:
            domain, problem = compiler.model_to_pddl(model)
            print(domain)
            print()
            print(problem)
        else:
            print(json.dumps(compiler.model_to_doc(model), indent=2))
        return 0
    if args.what == "landmarks":
        if not goal:
            print("landmarks need --goal", file=sys.stderr)
            return 2
        graph = planner.extract_landmarks(model)
        print(json.dumps(planner.landmarks_to_doc(graph), indent=2))
        return 0
    return 2


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    config = _load_config(args)
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conductor")
    sub = parser.add_subparsers(dest="command", required=True)

    repl = sub.add_parser("repl", help="interactive chat against an in-process session")
    repl.add_argument("--config", help="config file (YAML or JSON)")
    repl.add_argument("--mode", choices=["planner", "s3"])
    repl.add_argument("--seed", type=int)
    repl.add_argument("--json", action="store_true", help="machine-readable output")
    repl.set_defaults(func=cmd_repl)

    run = sub.add_parser("run", help="run scripted scenario files")
    run.add_argument("scenario", nargs="+", help="scenario file(s)")
    run.add_argument("--config", help="config file overriding scenario config")
    run.add_argument("--json", action="store_true")
    run.set_defaults(func=cmd_run)

    plan_cmd = sub.add_parser("plan", help="compile and plan for a goal; print plan, stats, landmarks")
    plan_cmd.add_argument("--goal", help="comma-separated goal elements")
    plan_cmd.add_argument("--known", help="comma-separated elements assumed known")
    plan_cmd.add_argument("--config", help="config file")
    plan_cmd.add_argument("--mode", choices=["planner", "s3"])
    plan_cmd.add_argument("--seed", type=int)
    plan_cmd.add_argument("--json", action="store_true")
    plan_cmd.set_defaults(func=cmd_plan)

    dump = sub.add_parser("dump", help="dump the compiled model, landmarks, or catalog")
    dump.add_argument("what", choices=["model", "landmarks", "catalog"])
    dump.add_argument("--goal", help="comma-separated goal elements")
    dump.add_argument("--config", help="config file")
    dump.add_argument("--mode", choices=["planner", "s3"])
    dump.add_argument("--seed", type=int)
    dump.add_argument("--pddl", action="store_true", help="emit planning-domain text instead of JSON")
    dump.add_argument("--json", action="store_true")
    dump.set_defaults(func=cmd_dump)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--config", help="config file")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--mode", choices=["planner", "s3"])
    serve.add_argument("--seed", type=int)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
