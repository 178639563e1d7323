"""FastAPI server exposing POST /predict and GET /health per docs/protocol.md."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, field_validator

from .models import ModelError, build_model


@dataclass
class ServerConfig:
    model_spec: dict
    task: str = "qa"
    auth_token: str | None = None

    def digest(self) -> str:
        payload = json.dumps(self.model_spec, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class PredictBody(BaseModel):
    task: str
    target: dict
    sequences: list[list[str]]

    @field_validator("sequences")
    @classmethod
    def _non_empty(cls, v):
        if len(v) < 1:
            raise ValueError("batch must contain at least one sequence")
        for i, seq in enumerate(v):
            if len(seq) < 1:
                raise ValueError(f"sequence {i} is empty")
        return v

    @field_validator("target")
    @classmethod
    def _target_shape(cls, v):
        kind = v.get("kind")
        if kind == "label":
            if "label" not in v:
                raise ValueError("label target needs a 'label' field")
        elif kind == "span":
            if "start" not in v or "end" not in v:
                raise ValueError("span target needs 'start' and 'end' fields")
        else:
            raise ValueError("target.kind must be 'label' or 'span'")
        return v


def create_app(config: ServerConfig) -> FastAPI:
    model = build_model(config.model_spec)  # fail fast on a bad spec
    app = FastAPI(title="modelserver")

    @app.exception_handler(RequestValidationError)
    async def validation_to_400(request: Request, exc: RequestValidationError):
        fields = [".".join(str(p) for p in err["loc"]) for err in exc.errors()]
        return JSONResponse(
            status_code=400,
            content={"error": {"fields": fields, "message": "malformed request"}},
        )

    def authorized(request: Request) -> bool:
        if config.auth_token is None:
            return True
        header = request.headers.get("authorization", "")
        return header == f"Bearer {config.auth_token}"

    @app.get("/health")
    async def health(request: Request):
        if not authorized(request):
            return JSONResponse(status_code=401, content={"error": {"message": "unauthorized"}})
        return {"digest": config.digest(), "task": config.task}

    @app.post("/predict")
    async def predict(body: PredictBody, request: Request):
        if not authorized(request):
            return JSONResponse(status_code=401, content={"error": {"message": "unauthorized"}})
        if body.task != config.task:
            return JSONResponse(
                status_code=400,
                content={"error": {"fields": ["task"], "message": f"server hosts a {config.task} model"}},
            )
        try:
            scores, candidates = model.score_batch(body.target, body.sequences)
        except ModelError as exc:
            return JSONResponse(
                status_code=400,
                content={"error": {"fields": ["target"], "message": str(exc)}},
            )
        except Exception:
            # Opaque by design: clients get no model internals.
            return JSONResponse(status_code=500, content={"error": {"message": "model failure"}})
        return {"scores": scores, "candidates": candidates}

    return app
