"""Fixtures: an in-thread uvicorn server on an ephemeral port."""

from __future__ import annotations

import threading
import time

import pytest
import uvicorn

from modelserver.app import ServerConfig, create_app


class LiveServer:
    def __init__(self, config: ServerConfig):
        self._uv = uvicorn.Server(
            uvicorn.Config(create_app(config), host="127.0.0.1", port=0, log_level="error")
        )
        self._thread = threading.Thread(target=self._uv.run, daemon=True)

    def __enter__(self) -> str:
        self._thread.start()
        for _ in range(200):
            if self._uv.started:
                break
            time.sleep(0.025)
        else:
            raise RuntimeError("server did not start")
        port = self._uv.servers[0].sockets[0].getsockname()[1]
        return f"http://127.0.0.1:{port}"

    def __exit__(self, *exc) -> None:
        self._uv.should_exit = True
        self._thread.join(timeout=5)


@pytest.fixture
def live_server():
    return LiveServer
