"""Run the model server: ``python -m modelserver --model spec.json --task qa``."""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import uvicorn

from .app import ServerConfig, create_app


def load_spec(value: str) -> dict:
    if value.strip().startswith("{"):
        return json.loads(value)
    return json.loads(Path(value).read_text())


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="modelserver", description=__doc__)
    parser.add_argument("--model", required=True, help="model spec JSON or file path")
    parser.add_argument("--task", choices=["qa", "nli"], default="qa")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8100)
    parser.add_argument("--token", default=None, help="require this bearer token")
    args = parser.parse_args(argv)

    config = ServerConfig(model_spec=load_spec(args.model), task=args.task, auth_token=args.token)
    uvicorn.run(create_app(config), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
