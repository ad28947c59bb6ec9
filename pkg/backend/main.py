#!/usr/bin/env python3
"""
Ising spinor toolkit - entry point

With no arguments, serves the HTTP API; otherwise runs the CLI.
"""

import sys

import uvicorn

from backend.config.settings import settings


def run() -> None:
    if len(sys.argv) > 1:
        from backend.cli import cli_main
        sys.exit(cli_main(sys.argv[1:]))
    uvicorn.run(
        "backend.servers.observable_server:app",
        host=settings.HOST,
        port=settings.PORT,
        reload=settings.DEBUG,
        log_level=settings.LOG_LEVEL.lower(),
    )


if __name__ == "__main__":
    run()
