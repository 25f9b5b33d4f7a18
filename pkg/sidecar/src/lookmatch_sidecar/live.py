"""HTTP client for live model endpoints (VLM describe, detector, embedder).

The endpoint speaks a single JSON POST protocol:

    request   {"task": <str>, "model": <str>, "items": [...]}
    response  {"results": [...]}  aligned with items

Configuration comes from the environment:
    LOOKMATCH_SIDECAR_ENDPOINT   base URL
    LOOKMATCH_SIDECAR_TOKEN      bearer token (optional)

Batches are retried with exponential backoff; after the retry budget is
exhausted an EndpointFailure carries per-batch attempt counts so partial
progress is auditable.
"""

from __future__ import annotations

import os
import time
from typing import Any, Callable, Sequence

import requests

ENDPOINT_ENV = "LOOKMATCH_SIDECAR_ENDPOINT"
TOKEN_ENV = "LOOKMATCH_SIDECAR_TOKEN"

DEFAULT_BATCH = 32
DEFAULT_RETRIES = 3


class EndpointFailure(Exception):
    def __init__(self, message: str, attempts: dict[int, int]):
        super().__init__(message)
        self.attempts = attempts


class EndpointClient:
    def __init__(
        self,
        endpoint: str | None = None,
        token: str | None = None,
        batch_size: int = DEFAULT_BATCH,
        max_retries: int = DEFAULT_RETRIES,
        timeout: float = 60.0,
        post: Callable[..., Any] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV, "")
        if not self.endpoint:
            raise EndpointFailure(
                f"no endpoint configured; set {ENDPOINT_ENV} or pass --mock", {}
            )
        self.token = token if token is not None else os.environ.get(TOKEN_ENV, "")
        self.batch_size = batch_size
        self.max_retries = max_retries
        self.timeout = timeout
        self._post = post or requests.post
        self._sleep = sleep
        self.attempts: dict[int, int] = {}

    def run(self, task: str, model: str, items: Sequence[dict]) -> list[Any]:
        results: list[Any] = []
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        for batch_no, lo in enumerate(range(0, len(items), self.batch_size)):
            batch = list(items[lo: lo + self.batch_size])
            payload = {"task": task, "model": model, "items": batch}
            last_error = None
            for attempt in range(1, self.max_retries + 1):
                self.attempts[batch_no] = attempt
                try:
                    resp = self._post(
                        self.endpoint, json=payload, headers=headers, timeout=self.timeout
                    )
                    resp.raise_for_status()
                    body = resp.json()
                    got = body["results"]
                    if len(got) != len(batch):
                        raise ValueError(
                            f"endpoint returned {len(got)} results for {len(batch)} items"
                        )
                    results.extend(got)
                    last_error = None
                    break
                except Exception as exc:  # noqa: BLE001 - every failure is retryable here
                    last_error = exc
                    if attempt < self.max_retries:
                        self._sleep(min(2.0 ** attempt, 30.0))
            if last_error is not None:
                raise EndpointFailure(
                    f"{task} batch {batch_no} failed after "
                    f"{self.attempts[batch_no]} attempts: {last_error}",
                    dict(self.attempts),
                ) from last_error
        return results
