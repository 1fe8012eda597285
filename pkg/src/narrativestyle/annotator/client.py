"""Chat-completion client with a disk cache and an offline replay mode."""
from __future__ import annotations

import configparser
import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

from ..errors import EndpointError

log = logging.getLogger(__name__)

API_KEY_ENV = "NARRATIVESTYLE_API_KEY"
BASE_URL_ENV = "NARRATIVESTYLE_BASE_URL"
MODEL_ENV = "NARRATIVESTYLE_MODEL"


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = "http://localhost:8000/v1"
    model: str = "meta-llama/Llama-3.1-8B-Instruct"
    timeout: float = 60.0
    max_concurrency: int = 4
    retries: int = 3
    backoff: float = 1.0
    segment_template: str = "segment_v1"
    annotate_template: str = "annotate_v1"
    api_key: str | None = None

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")

    @classmethod
    def load(cls, path: str | Path | None = None, env=None) -> "EndpointConfig":
        """Read ``[endpoint]`` from an INI file, then apply environment overrides."""
        env = os.environ if env is None else env
        values: dict = {}
        if path is not None:
            parser = configparser.ConfigParser(interpolation=None)
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
            if parser.has_section("endpoint"):
                sec = parser["endpoint"]
                for key in ("base_url", "model", "segment_template", "annotate_template"):
                    if key in sec:
                        values[key] = sec[key]
                for key in ("timeout", "backoff"):
                    if key in sec:
                        values[key] = sec.getfloat(key)
                for key in ("max_concurrency", "retries"):
                    if key in sec:
                        values[key] = sec.getint(key)
        if env.get(BASE_URL_ENV):
            values["base_url"] = env[BASE_URL_ENV]
        if env.get(MODEL_ENV):
            values["model"] = env[MODEL_ENV]
        if env.get(API_KEY_ENV):
            values["api_key"] = env[API_KEY_ENV]
        return cls(**values)


def request_key(model: str, messages: list[dict]) -> str:
    blob = json.dumps({"model": model, "messages": messages}, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ResponseCache:
    """One JSON file per request, keyed by hash of (model id, messages)."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> str | None:
        path = self._path(key)
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)["response"]

    def put(self, key: str, model: str, messages: list[dict], response: str) -> None:
        entry = {"model": model, "messages": messages, "response": response}
        tmp = self._path(key).with_suffix(".tmp")
        with self._lock:
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(entry, fh, ensure_ascii=False, indent=1, sort_keys=True)
                fh.write("\n")
            tmp.replace(self._path(key))


class ChatClient:
    """Sends chat-completion requests; replays from cache when possible.

    In offline mode a cache miss raises ``EndpointError`` instead of calling
    the network.
    """

    def __init__(self, config: EndpointConfig, cache: ResponseCache | None = None, offline: bool = False,
                 transport: httpx.BaseTransport | None = None):
        if offline and cache is None:
            raise ValueError("offline mode needs a response cache")
        self.config = config
        self.cache = cache
        self.offline = offline
        self._transport = transport
        self._http: httpx.Client | None = None
        self._lock = threading.Lock()

    def _client(self) -> httpx.Client:
        with self._lock:
            if self._http is None:
                headers = {"Authorization": f"Bearer {self.config.api_key}"} if self.config.api_key else {}
                self._http = httpx.Client(timeout=self.config.timeout, headers=headers, transport=self._transport)
            return self._http

    def close(self) -> None:
        if self._http is not None:
            self._http.close()
            self._http = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def complete(self, messages: list[dict]) -> str:
        key = request_key(self.config.model, messages)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return hit
        if self.offline:
            raise EndpointError(f"offline mode: no cached response for request {key[:12]}")
        content = self._post(messages)
        if self.cache is not None:
            self.cache.put(key, self.config.model, messages, content)
        return content

    def _post(self, messages: list[dict]) -> str:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        payload = {
            "model": self.config.model,
            "messages": messages,
            "temperature": 0,
            "response_format": {"type": "json_object"},
        }
        last: Exception | None = None
        for attempt in range(self.config.retries + 1):
            if attempt:
                time.sleep(self.config.backoff * 2 ** (attempt - 1))
            try:
                resp = self._client().post(url, json=payload)
            except httpx.HTTPError as exc:
                last = exc
                log.warning("request to %s failed (attempt %d): %s", url, attempt + 1, exc)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = EndpointError(f"HTTP {resp.status_code} from {url}")
                log.warning("HTTP %d from %s (attempt %d)", resp.status_code, url, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise EndpointError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
            try:
                choices = resp.json().get("choices") or []
                return str(choices[0]["message"]["content"] or "")
            except (ValueError, LookupError, TypeError) as exc:
                raise EndpointError(f"unexpected response body from {url}") from exc
        raise EndpointError(f"endpoint {url} unreachable after {self.config.retries + 1} attempts: {last}")
