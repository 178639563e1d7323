"""HTTP client for out-of-process predictors speaking the /predict protocol.

Requests are split into batches and issued with a bounded number of in-flight
calls; each batch retries transient failures with exponential backoff.
Responses are reassembled in request order.  See docs/protocol.md for the
wire schema.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import httpx

from .blackbox import (
    MalformedRequestError,
    PredictRequest,
    PredictResponse,
    TransportError,
)


def _decode_candidates(raw) -> tuple | None:
    if raw is None:
        return None
    decoded = []
    for per_seq in raw:
        items = []
        for repr_, prob in per_seq:
            if isinstance(repr_, list):
                items.append(((int(repr_[0]), int(repr_[1])), float(prob)))
            else:
                items.append((repr_, float(prob)))
        decoded.append(tuple(items))
    return tuple(decoded)


@dataclass
class RemotePredictor:
    base_url: str
    token: str | None = None
    batch_size: int = 512
    max_in_flight: int = 4
    retries: int = 3
    backoff: float = 0.1
    timeout: float = 30.0
    _client: httpx.Client = field(init=False, repr=False)

    def __post_init__(self) -> None:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        self._client = httpx.Client(base_url=self.base_url, headers=headers, timeout=self.timeout)

    def close(self) -> None:
        self._client.close()

    def health(self) -> dict:
        resp = self._client.get("/health")
        resp.raise_for_status()
        return resp.json()

    def _post_batch(self, payload: dict) -> dict:
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._client.post("/predict", json=payload)
            except httpx.TransportError as exc:
                last_exc = exc
            else:
                if resp.status_code < 400:
                    return resp.json()
                if resp.status_code < 500:
                    raise MalformedRequestError(f"predict rejected ({resp.status_code}): {resp.text}")
                last_exc = TransportError(f"server error {resp.status_code}")
            if attempt < self.retries:
                time.sleep(self.backoff * (2**attempt))
        raise TransportError(f"predict failed after {self.retries + 1} attempts: {last_exc}")

    def predict(self, request: PredictRequest) -> PredictResponse:
        request.validate()
        sequences = request.sequences
        batches = [
            sequences[i : i + self.batch_size] for i in range(0, len(sequences), self.batch_size)
        ]
        payloads = [
            {
                "task": request.task.value,
                "target": request.target.to_json(),
                "sequences": [list(seq) for seq in batch],
            }
            for batch in batches
        ]

        results: list[dict | None] = [None] * len(batches)
        first_error: Exception | None = None
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            futures = {pool.submit(self._post_batch, p): i for i, p in enumerate(payloads)}
            for fut, idx in futures.items():
                try:
                    results[idx] = fut.result()
                except Exception as exc:  # keep collecting to count successes
                    if first_error is None:
                        first_error = exc

        if first_error is not None:
            succeeded = sum(len(r["scores"]) for r in results if r is not None)
            if isinstance(first_error, MalformedRequestError):
                raise first_error
            raise TransportError(str(first_error), succeeded=succeeded)

        scores: list[float] = []
        candidates: list = []
        has_candidates = False
        for r in results:
            scores.extend(float(s) for s in r["scores"])
            decoded = _decode_candidates(r.get("candidates"))
            if decoded is not None:
                has_candidates = True
                candidates.extend(decoded)
            else:
                candidates.extend([()] * len(r["scores"]))
        return PredictResponse(
            scores=tuple(scores),
            candidates=tuple(candidates) if has_candidates else None,
        )
