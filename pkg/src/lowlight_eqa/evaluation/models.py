"""Model endpoints: chat-completion HTTP services and offline stubs.

A model answers ``query(prompt, image_png, qa, condition)`` with raw text.
HTTP models ignore ``qa`` and ``condition``; stubs use them to stay
deterministic without any network access.
"""

from __future__ import annotations

import base64
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import httpx

from ..configfile import load_config_file
from ..errors import ConfigError
from ..seeding import stable_hash64

STUB_KINDS = ("oracle", "random", "constant", "gibberish")


class TransientModelError(Exception):
    """A failure worth retrying: transport error, HTTP 429 or 5xx."""


@dataclass
class StubModel:
    """Offline model. ``random`` picks uniformly via a hash of (seed, qa key, condition)."""

    kind: str
    model_id: str = ""
    seed: int = 0
    constant: str = "Yes"
    blind: bool = False

    def __post_init__(self) -> None:
        if self.kind not in STUB_KINDS:
            raise ConfigError(f"unknown stub kind {self.kind!r}; expected one of {STUB_KINDS}")
        self.model_id = self.model_id or f"stub-{self.kind}"

    def query(self, prompt: str, image: bytes | None, qa, condition) -> str:
        if self.kind == "oracle":
            return qa.answer
        if self.kind == "random":
            h = stable_hash64(self.seed, self.model_id, qa.key, getattr(condition, "name", str(condition)))
            return qa.choices[h % len(qa.choices)]
        if self.kind == "constant":
            return self.constant
        return f"zqxj {stable_hash64(prompt):016x} vrk"


def _openai_chat(model: str, prompt: str, image: bytes | None, params: dict) -> dict:
    content: list[dict] = [{"type": "text", "text": prompt}]
    if image is not None:
        url = "data:image/png;base64," + base64.b64encode(image).decode("ascii")
        content.append({"type": "image_url", "image_url": {"url": url}})
    return {"model": model, "messages": [{"role": "user", "content": content}], **params}


def _openai_chat_reply(body: dict) -> str:
    return body["choices"][0]["message"]["content"] or ""


# request template id -> (payload builder, reply extractor)
TEMPLATES: dict[str, tuple[Callable[..., dict], Callable[[dict], str]]] = {
    "openai-chat": (_openai_chat, _openai_chat_reply),
}


@dataclass
class HttpChatModel:
    """Chat-completion endpoint taking a base64 PNG attachment.

    ``params`` is merged into the request body untouched (temperature and
    other decoding controls); the default asks for greedy decoding.
    """

    model_id: str
    url: str
    model: str
    auth_env: str | None = None
    template: str = "openai-chat"
    params: dict = field(default_factory=lambda: {"temperature": 0})
    timeout_s: float = 60.0
    blind: bool = False
    transport: Any = None  # httpx transport override, used by tests

    def __post_init__(self) -> None:
        if self.template not in TEMPLATES:
            raise ConfigError(f"unknown request template {self.template!r}; known: {sorted(TEMPLATES)}")
        self._client: httpx.Client | None = None

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.auth_env:
            token = os.environ.get(self.auth_env)
            if not token:
                raise ConfigError(f"environment variable {self.auth_env} is not set")
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _get_client(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(timeout=self.timeout_s, transport=self.transport)
        return self._client

    def query(self, prompt: str, image: bytes | None, qa=None, condition=None) -> str:
        build, extract = TEMPLATES[self.template]
        payload = build(self.model, prompt, None if self.blind else image, self.params)
        try:
            resp = self._get_client().post(self.url, json=payload, headers=self._headers())
        except httpx.TransportError as exc:
            raise TransientModelError(f"{type(exc).__name__}: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientModelError(f"HTTP {resp.status_code}")
        resp.raise_for_status()
        return extract(resp.json())

    def close(self) -> None:
        if self._client is not None:
            self._client.close()
            self._client = None


def model_from_config(cfg: dict) -> StubModel | HttpChatModel:
    """Build a model from an endpoint descriptor.

    Stub: ``{"stub": "oracle" | "random" | "constant" | "gibberish", "id": ..., "seed": ...}``.
    HTTP: ``{"id", "url", "model", "auth_env", "template", "params", "timeout_s", "blind"}``.
    """
    cfg = dict(cfg)
    if "stub" in cfg:
        kind = cfg.pop("stub")
        allowed = {"id", "seed", "constant", "blind"}
        if set(cfg) - allowed:
            raise ConfigError(f"unknown stub keys: {sorted(set(cfg) - allowed)}")
        return StubModel(kind, cfg.get("id", ""), int(cfg.get("seed", 0)), cfg.get("constant", "Yes"), bool(cfg.get("blind", False)))
    for key in ("url", "model"):
        if key not in cfg:
            raise ConfigError(f"endpoint descriptor lacks {key!r}")
    allowed = {"id", "url", "model", "auth_env", "template", "params", "timeout_s", "blind"}
    if set(cfg) - allowed:
        raise ConfigError(f"unknown endpoint keys: {sorted(set(cfg) - allowed)}")
    return HttpChatModel(
        model_id=cfg.get("id", cfg["model"]),
        url=cfg["url"],
        model=cfg["model"],
        auth_env=cfg.get("auth_env"),
        template=cfg.get("template", "openai-chat"),
        params=dict(cfg.get("params", {"temperature": 0})),
        timeout_s=float(cfg.get("timeout_s", 60.0)),
        blind=bool(cfg.get("blind", False)),
    )


def load_model(spec: str | Path | dict) -> StubModel | HttpChatModel:
    """Accept a descriptor dict, a JSON/TOML descriptor file, or ``stub:<kind>`` shorthand."""
    if isinstance(spec, dict):
        return model_from_config(spec)
    text = str(spec)
    if text.startswith("stub:"):
        return StubModel(text.split(":", 1)[1])
    return model_from_config(load_config_file(text))
