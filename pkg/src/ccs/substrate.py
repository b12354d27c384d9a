"""Dispatch prompt envelopes to chat-completion backends or a deterministic mock."""

from __future__ import annotations

import hashlib
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import httpx

from .corpus import ANSWER_LETTERS
from .scaffold import PromptEnvelope, format_marker, marker_block

log = logging.getLogger(__name__)

KINDS = ("http_chat", "mock")
VENDORS = ("openai", "anthropic")
RETRYABLE_STATUS = frozenset({408, 429, 500, 502, 503, 504})


class SubstrateError(RuntimeError):
    """Base error; carries the substrate id and one entry per attempt."""

    def __init__(self, message: str, substrate_id: str, attempts: list[str] | None = None):
        self.substrate_id = substrate_id
        self.attempts = list(attempts or [])
        super().__init__(f"[{substrate_id}] {message}")


class SubstrateConfigError(SubstrateError):
    pass


class SubstrateAuthError(SubstrateError):
    pass


class RateLimitExhaustedError(SubstrateError):
    pass


class SubstrateTimeoutError(SubstrateError):
    pass


class UpstreamUnavailableError(SubstrateError):
    pass


class MalformedUpstreamError(SubstrateError):
    pass


class UpstreamRejectedError(SubstrateError):
    """Non-retryable 4xx other than auth (bad request, unknown model, ...)."""


@dataclass(frozen=True)
class MockFaultPlan:
    """Fault injection for the mock substrate.

    ``level_overrides`` keys are an item id, or ``"<condition>/<item id>"`` to target a
    single condition.
    """

    level_overrides: dict[str, int] = field(default_factory=dict)
    malform: bool = False
    malform_items: frozenset[str] = frozenset()
    omit_items: frozenset[str] = frozenset()


@dataclass(frozen=True)
class SubstrateConfig:
    kind: str
    model_id: str
    substrate_id: str = ""
    endpoint_url: str = ""
    vendor: str = "openai"
    temperature: float = 0.0
    max_output_tokens: int = 512
    request_timeout: float = 60.0
    max_retries: int = 4
    parallelism_limit: int = 1
    backoff_base: float = 1.0
    backoff_jitter: bool = False
    allow_nonzero_temperature: bool = False
    requests_per_minute: float | None = None
    faults: MockFaultPlan = field(default_factory=MockFaultPlan)

    def __post_init__(self) -> None:
        if not self.substrate_id:
            object.__setattr__(self, "substrate_id", self.model_id)
        sid = self.substrate_id
        if self.kind not in KINDS:
            raise SubstrateConfigError(f"unknown substrate kind {self.kind!r}", sid)
        if self.kind == "http_chat":
            if not self.endpoint_url:
                raise SubstrateConfigError("http_chat requires endpoint_url", sid)
            if self.vendor not in VENDORS:
                raise SubstrateConfigError(f"unknown vendor {self.vendor!r}", sid)
        if self.temperature != 0 and not self.allow_nonzero_temperature:
            raise SubstrateConfigError(
                "evaluation runs require temperature 0 (set allow_nonzero_temperature to override)",
                sid,
            )
        if self.parallelism_limit < 1:
            raise SubstrateConfigError("parallelism_limit must be >= 1", sid)
        if self.max_retries < 0:
            raise SubstrateConfigError("max_retries must be >= 0", sid)

    @property
    def credential_env(self) -> str:
        return f"CCS_API_KEY_{self.vendor.upper()}"

    def api_key(self) -> str:
        key = os.environ.get(self.credential_env, "").strip()
        if not key:
            raise SubstrateAuthError(f"missing credential: set {self.credential_env}", self.substrate_id)
        return key

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SubstrateConfig":
        d = dict(d)
        faults = d.pop("faults", None)
        if faults:
            faults = MockFaultPlan(
                level_overrides=dict(faults.get("level_overrides", {})),
                malform=bool(faults.get("malform", False)),
                malform_items=frozenset(faults.get("malform_items", ())),
                omit_items=frozenset(faults.get("omit_items", ())),
            )
            d["faults"] = faults
        try:
            return cls(**d)
        except TypeError as exc:
            raise SubstrateConfigError(str(exc), d.get("substrate_id") or d.get("model_id", "?")) from None

    def describe(self) -> dict[str, Any]:
        """Manifest-safe summary (no credentials)."""
        return {
            "substrate_id": self.substrate_id,
            "kind": self.kind,
            "model_id": self.model_id,
            "vendor": self.vendor if self.kind == "http_chat" else None,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
        }


@dataclass(frozen=True)
class SubstrateResponse:
    text: str
    latency: float
    prompt_tokens: int
    completion_tokens: int
    substrate_id: str
    attempt_count: int


def mock_config(substrate_id: str = "mock", faults: MockFaultPlan | None = None) -> SubstrateConfig:
    return SubstrateConfig(
        kind="mock", model_id="mock", substrate_id=substrate_id, faults=faults or MockFaultPlan()
    )


def _canned_answer(envelope: PromptEnvelope) -> str:
    digest = hashlib.sha256(envelope.item_id.encode()).digest()
    return f"Answer: {ANSWER_LETTERS[digest[0] % 4]}"


def mock_complete(envelope: PromptEnvelope, faults: MockFaultPlan | None = None) -> SubstrateResponse:
    """Emit exactly the markers the envelope requests, then a canned answer line."""
    faults = faults or MockFaultPlan()
    item = envelope.item_id
    lines: list[str] = []
    directive = envelope.directive
    if directive is not None and item not in faults.omit_items:
        override = faults.level_overrides.get(
            f"{envelope.condition}/{item}", faults.level_overrides.get(item)
        )
        if override is None:
            lines = marker_block(directive)
        else:
            lines = [format_marker(override, directive.partition, directive.subject)]
            if override >= 2:
                lines.append("[CCS:UNCERTAINTY]")
            if override >= 3:
                lines.append("[CCS:BOUNDARY]")
        if faults.malform or item in faults.malform_items:
            lines = [lines[0][: len("[CCS:INTERV")]]
    lines.append(_canned_answer(envelope))
    text = "\n".join(lines)
    return SubstrateResponse(
        text=text,
        latency=0.0,
        prompt_tokens=len((envelope.system_text + envelope.user_text).split()),
        completion_tokens=len(text.split()),
        substrate_id="mock",
        attempt_count=1,
    )


class RateLimiter:
    """Minimum spacing between request starts, shared across threads."""

    def __init__(self, per_minute: float | None, clock=time.monotonic, sleep=time.sleep):
        self.interval = 60.0 / per_minute if per_minute else 0.0
        self._next = 0.0
        self._lock = threading.Lock()
        self._clock = clock
        self._sleep = sleep

    def acquire(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = self._clock()
            start = max(now, self._next)
            self._next = start + self.interval
        if start > now:
            self._sleep(start - now)


def backoff_delay(attempt: int, base: float, jitter: bool = False, rng: random.Random | None = None) -> float:
    """Delay before retry number ``attempt`` (1-based): base * 2**(attempt-1)."""
    delay = base * 2 ** (attempt - 1)
    if jitter:
        delay *= 0.5 + (rng or random).random()
    return delay


def _build_request(config: SubstrateConfig, envelope: PromptEnvelope, key: str) -> tuple[dict, dict]:
    if config.vendor == "anthropic":
        body = {
            "model": config.model_id,
            "system": envelope.system_text,
            "messages": [{"role": "user", "content": envelope.user_text}],
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
        }
        headers = {"x-api-key": key, "anthropic-version": "2023-06-01"}
    else:
        body = {
            "model": config.model_id,
            "messages": envelope.messages(),
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
        }
        headers = {"Authorization": f"Bearer {key}"}
    return body, headers


def _parse_payload(config: SubstrateConfig, payload: Any) -> tuple[str, int, int]:
    if config.vendor == "anthropic":
        blocks = payload["content"]
        text = "".join(b.get("text", "") for b in blocks if b.get("type") == "text")
        usage = payload.get("usage") or {}
        return text, int(usage.get("input_tokens", 0)), int(usage.get("output_tokens", 0))
    text = payload["choices"][0]["message"]["content"]
    usage = payload.get("usage") or {}
    return text, int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))


class Substrate:
    """A configured backend. Thread-safe; share one instance per substrate in a run."""

    def __init__(
        self,
        config: SubstrateConfig,
        *,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._sleep = sleep
        self._client = client
        self._limiter = RateLimiter(config.requests_per_minute, sleep=sleep)
        self._rng = random.Random(0)

    def check_credentials(self) -> None:
        if self.config.kind == "http_chat":
            self.config.api_key()

    def complete(self, envelope: PromptEnvelope) -> SubstrateResponse:
        if self.config.kind == "mock":
            resp = mock_complete(envelope, self.config.faults)
            return SubstrateResponse(
                resp.text, 0.0, resp.prompt_tokens, resp.completion_tokens, self.config.substrate_id, 1
            )
        return self._complete_http(envelope)

    def _complete_http(self, envelope: PromptEnvelope) -> SubstrateResponse:
        cfg = self.config
        sid = cfg.substrate_id
        key = cfg.api_key()
        body, headers = _build_request(cfg, envelope, key)
        client = self._client or httpx.Client(timeout=cfg.request_timeout)
        history: list[str] = []
        last_kind: type[SubstrateError] = UpstreamUnavailableError
        try:
            for attempt in range(1, cfg.max_retries + 2):
                if attempt > 1:
                    self._sleep(backoff_delay(attempt - 1, cfg.backoff_base, cfg.backoff_jitter, self._rng))
                self._limiter.acquire()
                started = time.monotonic()
                try:
                    resp = client.post(cfg.endpoint_url, json=body, headers=headers, timeout=cfg.request_timeout)
                except httpx.TimeoutException as exc:
                    history.append(f"attempt {attempt}: timeout ({type(exc).__name__})")
                    last_kind = SubstrateTimeoutError
                    continue
                except httpx.TransportError as exc:
                    history.append(f"attempt {attempt}: transport error ({exc})")
                    last_kind = UpstreamUnavailableError
                    continue
                latency = time.monotonic() - started
                status = resp.status_code
                history.append(f"attempt {attempt}: HTTP {status}")
                if status in (401, 403):
                    raise SubstrateAuthError(f"authentication rejected (HTTP {status})", sid, history)
                if status in RETRYABLE_STATUS:
                    last_kind = RateLimitExhaustedError if status == 429 else UpstreamUnavailableError
                    log.warning("%s: HTTP %s, retrying", sid, status)
                    continue
                if status >= 400:
                    raise UpstreamRejectedError(f"HTTP {status}: {resp.text[:200]}", sid, history)
                try:
                    text, p_tok, c_tok = _parse_payload(cfg, resp.json())
                except (ValueError, KeyError, IndexError, TypeError, AttributeError) as exc:
                    raise MalformedUpstreamError(f"unexpected payload ({exc!r})", sid, history) from None
                if not isinstance(text, str) or not text:
                    raise MalformedUpstreamError("empty completion text", sid, history)
                return SubstrateResponse(text, latency, p_tok, c_tok, sid, attempt)
        finally:
            if self._client is None:
                client.close()
        raise last_kind(f"giving up after {len(history)} attempts", sid, history)


def complete(config: SubstrateConfig, envelope: PromptEnvelope) -> SubstrateResponse:
    return Substrate(config).complete(envelope)
