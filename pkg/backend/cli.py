#!/usr/bin/env python3
"""
Command-line surface of the Ising spinor toolkit.

Every subcommand takes a JSON request (--config FILE, "-" for stdin, or
--json STRING) validated by the same models as the HTTP API. Exit codes:
0 success, 1 identity failure, 2 input error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from pydantic import ValidationError

from backend.services.toolkit_service import HANDLERS
from backend.utils.errors import ToolkitError
from backend.utils.formatting import dumps
from backend.utils.logging_config import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_INPUT = 0, 1, 2
CSV_COMMANDS = ("enumerate", "partition", "obs", "solve", "converge")

HELP = {
    "validate": "check domain axioms and cover flags",
    "enumerate": "list configurations with given sources, CSV on stdout",
    "partition": "exact partition function and spin expectations, CSV on stdout",
    "obs": "exact spinor observable values, CSV on stdout",
    "check": "exact identity suite on one domain",
    "solve": "numerical boundary value problem, field CSV on stdout and a JSON H-report",
    "theta": "continuum ratio in the punctured half-plane",
    "pfratio": "continuum Pfaffian ratio over 2n+2 boundary points",
    "converge": "mesh-refinement experiment, CSV on stdout",
    "catalogue": "identity suite over the fixed catalogue",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ising-spinor", description="Spinor observables of the critical Ising model.")
    parser.add_argument("--log-level", default=None, help="logging level (default: LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in HANDLERS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", type=str, default=None, help="JSON request file, '-' for stdin")
        p.add_argument("--json", dest="inline", type=str, default=None, help="JSON request string")
        if name in ("theta", "pfratio"):
            p.add_argument("--punctures", nargs="*", default=None, help='punctures as "x+yi"')
        if name == "pfratio":
            p.add_argument("--points", nargs="*", type=float, default=None, help="ordered real boundary points")
        if name == "converge":
            p.add_argument("--output", type=str, default=None, help="also write the CSV to this path")
        if name == "solve":
            p.add_argument("--report", type=str, default=None, help="write the JSON H-report here instead of stderr")
        if name == "catalogue":
            p.add_argument("--flip-eta", action="store_true", help="negate eta_a (sign detector)")
            p.add_argument("--no-solver", action="store_true", help="skip the solver comparison")
    return parser


def load_request(args: argparse.Namespace) -> Dict[str, Any]:
    if args.config == "-":
        payload = json.loads(sys.stdin.read())
    elif args.config:
        payload = json.loads(Path(args.config).read_text())
    elif args.inline:
        payload = json.loads(args.inline)
    else:
        payload = {}
    if not isinstance(payload, dict):
        raise ValueError("the JSON request must be an object")

    if getattr(args, "punctures", None) is not None:
        payload["punctures"] = args.punctures
    if getattr(args, "points", None) is not None:
        payload["points"] = args.points
    if getattr(args, "output", None) is not None:
        payload["output"] = args.output
    if getattr(args, "flip_eta", False):
        payload["flip_eta"] = True
    if getattr(args, "no_solver", False):
        payload["solver"] = False
    return payload


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INPUT
    configure_logging(args.log_level)

    model, handler = HANDLERS[args.command]
    try:
        request = model.model_validate(load_request(args))
        result = handler(request)
    except (json.JSONDecodeError, ValidationError, ValueError, OSError) as e:
        logger.error(f"Invalid request: {str(e)}")
        print(dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return EXIT_INPUT
    except ToolkitError as e:
        logger.error(f"{args.command} failed: {str(e)}")
        print(dumps(e.to_dict()), file=sys.stderr)
        return e.exit_code

    if args.command == "solve":
        report = dumps({k: v for k, v in result.items() if k not in ("csv", "values")})
        if args.report:
            Path(args.report).write_text(report + "\n")
        else:
            print(report, file=sys.stderr)
    if args.command in CSV_COMMANDS:
        sys.stdout.write(result["csv"])
    else:
        print(dumps(result))
    return EXIT_OK if result.get("pass", True) else EXIT_FAILURE


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
