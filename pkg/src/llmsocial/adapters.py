"""HTTP plumbing shared by the remote adapters (encoder, scorer, labelers, LLM).

Nothing here runs unless an adapter is explicitly configured; tests inject
a ``transport`` callable instead of touching the network.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

from .errors import TransportError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def http_post_json(url: str, body: dict, token: str | None = None, timeout: float = 30.0) -> dict:
    data = json.dumps(body).encode("utf-8")
    req = urllib.request.Request(url, data=data, method="POST")
    req.add_header("Content-Type", "application/json")
    if token:
        req.add_header("Authorization", f"Bearer {token}")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))
    except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
        raise TransportError(f"POST {url} failed: {exc}") from exc


def env_transport(url: str, token_env: str, timeout: float = 30.0) -> Callable[[dict], dict]:
    """Transport that posts JSON to ``url`` with a bearer token read from ``token_env``."""
    def post(body: dict) -> dict:
        return http_post_json(url, body, token=os.environ.get(token_env), timeout=timeout)

    return post


def with_retries(fn: Callable[[], R], retries: int = 3, base_delay: float = 0.5,
                 sleep: Callable[[float], None] = time.sleep) -> R:
    """Call ``fn``; on TransportError retry with exponential backoff."""
    for attempt in range(retries + 1):
        try:
            return fn()
        except TransportError:
            if attempt == retries:
                raise
            delay = base_delay * 2 ** attempt
            logger.warning("transport error, retrying in %.2fs", delay)
            sleep(delay)
    raise AssertionError("unreachable")


def bounded_map(fn: Callable[[T], R], items: Sequence[T], max_in_flight: int = 4) -> list[R]:
    """Apply ``fn`` concurrently, returning results in input order."""
    if max_in_flight <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(fn, items))


class JsonlCache:
    """Append-only ``key -> value`` cache, one JSON record per line.

    Writes are serialised with a lock so concurrent scorers can share it.
    """

    def __init__(self, path=None):
        self.path = path
        self._data: dict[str, object] = {}
        self._lock = threading.Lock()
        if path and os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        self._data[rec["key"]] = rec["value"]

    def __contains__(self, key: str) -> bool:
        return key in self._data

    def get(self, key: str, default=None):
        return self._data.get(key, default)

    def put_many(self, items: Iterable[tuple[str, object]]) -> None:
        items = list(items)
        with self._lock:
            for k, v in items:
                self._data[k] = v
            if self.path:
                with open(self.path, "a", encoding="utf-8") as fh:
                    for k, v in items:
                        fh.write(json.dumps({"key": k, "value": v}, ensure_ascii=False) + "\n")

    def __len__(self) -> int:
        return len(self._data)
