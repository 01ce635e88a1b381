"""Uniform chat-completion interface with token, latency, and cost capture.

Two backends share one calling convention: a deterministic fixture-replay
backend (first-class, used by all offline evaluation) and a minimal live
HTTP client. Costs are computed in decimal arithmetic so reported dollars
carry no binary-float drift.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path

import requests

MODEL_API_KEY_ENV = "MODEL_API_KEY"
GEOCODER_API_KEY_ENV = "GEOCODER_API_KEY"

_MICRO = Decimal(10) ** 6
_REASONING_EFFORTS = ("low", "medium", "high")


class BackendUnavailable(RuntimeError):
    """Network, auth, or configuration failure talking to a backend."""


class BackendTimeout(RuntimeError):
    """The backend did not answer within the configured timeout."""


class FixtureExhausted(RuntimeError):
    """A fixture script ran out of turns."""


class FixtureMismatch(RuntimeError):
    """A fixture turn's request predicate did not match the request."""


@dataclass
class ChatMessage:
    role: str  # system | user | assistant | tool
    content: str


@dataclass
class ToolCallRequest:
    name: str
    arguments: dict


@dataclass
class ModelResponse:
    """Either final assistant text or a tool-call request."""

    text: str | None = None
    tool_call: ToolCallRequest | None = None


@dataclass(frozen=True)
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
        )


@dataclass(frozen=True)
class ModelConfig:
    """Per-method model settings.

    temperature and reasoning_effort are mutually exclusive: each method
    configures exactly one of them (or neither).
    """

    model_id: str
    temperature: float | None = None
    reasoning_effort: str | None = None
    seed: int | None = None
    max_output_tokens: int | None = None

    def __post_init__(self):
        if self.temperature is not None and self.reasoning_effort is not None:
            raise ValueError("temperature and reasoning_effort are mutually exclusive")
        if self.reasoning_effort is not None and self.reasoning_effort not in _REASONING_EFFORTS:
            raise ValueError(f"reasoning_effort must be one of {_REASONING_EFFORTS}")


def _to_decimal(value) -> Decimal:
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        return Decimal(str(value))
    return Decimal(value)


class PriceTable:
    """USD prices per million input/output tokens, keyed by model id.

    Lookup tries the exact id first, then the longest family prefix, so
    dated snapshot ids resolve to their family row.
    """

    def __init__(self, prices: dict[str, tuple] | None = None):
        self._prices: dict[str, tuple[Decimal, Decimal]] = {}
        for model_id, (p_in, p_out) in (prices or {}).items():
            self.set_price(model_id, p_in, p_out)

    def set_price(self, model_id: str, p_in, p_out) -> None:
        p_in, p_out = _to_decimal(p_in), _to_decimal(p_out)
        if p_in < 0 or p_out < 0:
            raise ValueError("prices must be non-negative")
        self._prices[model_id] = (p_in, p_out)

    def lookup(self, model_id: str) -> tuple[Decimal, Decimal]:
        if model_id in self._prices:
            return self._prices[model_id]
        candidates = [k for k in self._prices if model_id.startswith(k + "-")]
        if candidates:
            return self._prices[max(candidates, key=len)]
        raise KeyError(f"no price for model {model_id!r}")

    def items(self):
        return self._prices.items()


def default_price_table() -> PriceTable:
    """Packaged per-1M-token prices for the evaluated model families."""
    return PriceTable(
        {
            "gpt-4.1": ("2.00", "8.00"),
            "gpt-4o": ("5.00", "15.00"),
            "gpt-3.5-turbo": ("0.50", "1.50"),
            "o4-mini": ("1.10", "4.40"),
            "o3": ("10.00", "40.00"),
            "o3-mini": ("1.10", "4.40"),
        }
    )


DEFAULT_PRICES = default_price_table()


def call_cost(usage: TokenUsage, p_in, p_out) -> Decimal:
    """Dollar cost of one call: tokens/1M times the per-1M prices.

    Exact decimal arithmetic; no binary-float rounding enters reported
    dollars.
    """
    p_in, p_out = _to_decimal(p_in), _to_decimal(p_out)
    return (Decimal(usage.input_tokens) * p_in + Decimal(usage.output_tokens) * p_out) / _MICRO


@dataclass
class RunRecord:
    """Per-call accounting attached to every Prediction."""

    method_id: str
    row_id: str
    usage: TokenUsage
    latency_s: float
    cost_usd: Decimal
    tool_calls: list = field(default_factory=list)
    raw_response: str = ""
    failed: bool = False
    reason: str | None = None

    def __post_init__(self):
        if self.latency_s < 0:
            raise ValueError("latency_s must be >= 0")


class FixtureBackend:
    """Deterministic replay backend driven by a JSONL script.

    Each script line is one turn:

        {"expect": {"contains": "..."},            # optional predicate
         "response": {"type": "text", "text": "..."}
                   | {"type": "tool_call", "name": "...", "arguments": {...}},
         "usage": {"input_tokens": N, "output_tokens": N}}

    Turns are consumed in order; the predicate (a substring of the
    concatenated request messages) guards against scripts drifting out
    of sync with the conversation. Thread-safe; identical scripts and
    inputs produce identical transcripts.
    """

    def __init__(self, turns: list[dict]):
        self._turns = list(turns)
        self._pos = 0
        self._lock = threading.Lock()

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "FixtureBackend":
        turns = []
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    turns.append(json.loads(line))
        return cls(turns)

    @property
    def remaining_turns(self) -> int:
        return len(self._turns) - self._pos

    def complete(
        self,
        cfg: ModelConfig,
        messages: list[ChatMessage],
        tools: list[dict] | None = None,
    ) -> tuple[ModelResponse, TokenUsage]:
        with self._lock:
            if self._pos >= len(self._turns):
                raise FixtureExhausted(f"script exhausted after {self._pos} turns")
            turn = self._turns[self._pos]
            self._pos += 1

        expect = turn.get("expect")
        if expect and "contains" in expect:
            transcript = "\n".join(m.content for m in messages)
            if expect["contains"] not in transcript:
                raise FixtureMismatch(
                    f"turn {self._pos}: expected request to contain {expect['contains']!r}"
                )

        response = turn["response"]
        if response["type"] == "text":
            model_response = ModelResponse(text=response["text"])
        elif response["type"] == "tool_call":
            model_response = ModelResponse(
                tool_call=ToolCallRequest(response["name"], dict(response.get("arguments", {})))
            )
        else:
            raise ValueError(f"unknown fixture response type {response['type']!r}")

        usage_doc = turn.get("usage", {})
        usage = TokenUsage(
            int(usage_doc.get("input_tokens", 0)),
            int(usage_doc.get("output_tokens", 0)),
        )
        return model_response, usage


def text_turn(text: str, input_tokens: int = 0, output_tokens: int = 0, expect_contains: str | None = None) -> dict:
    """Build a fixture script turn that answers with plain text."""
    turn: dict = {
        "response": {"type": "text", "text": text},
        "usage": {"input_tokens": input_tokens, "output_tokens": output_tokens},
    }
    if expect_contains is not None:
        turn["expect"] = {"contains": expect_contains}
    return turn


def tool_call_turn(
    name: str,
    arguments: dict,
    input_tokens: int = 0,
    output_tokens: int = 0,
    expect_contains: str | None = None,
) -> dict:
    """Build a fixture script turn that issues a tool call."""
    turn: dict = {
        "response": {"type": "tool_call", "name": name, "arguments": arguments},
        "usage": {"input_tokens": input_tokens, "output_tokens": output_tokens},
    }
    if expect_contains is not None:
        turn["expect"] = {"contains": expect_contains}
    return turn


def write_fixture_script(path: str | Path, turns: list[dict]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for turn in turns:
            fh.write(json.dumps(turn) + "\n")


class LiveBackend:
    """Minimal chat-completions HTTP client.

    Disabled by default in offline runs; exists for the optional live
    mode. One configurable retry, then BackendUnavailable/BackendTimeout.
    """

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        timeout_s: float = 120.0,
        max_retries: int = 1,
    ):
        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else os.environ.get(MODEL_API_KEY_ENV)
        self.timeout_s = timeout_s
        self.max_retries = max_retries

    def complete(
        self,
        cfg: ModelConfig,
        messages: list[ChatMessage],
        tools: list[dict] | None = None,
    ) -> tuple[ModelResponse, TokenUsage]:
        if not self.api_key:
            raise BackendUnavailable(f"{MODEL_API_KEY_ENV} is not set")
        payload: dict = {
            "model": cfg.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
        }
        if cfg.temperature is not None:
            payload["temperature"] = cfg.temperature
        if cfg.reasoning_effort is not None:
            payload["reasoning_effort"] = cfg.reasoning_effort
        if cfg.seed is not None:
            payload["seed"] = cfg.seed
        if cfg.max_output_tokens is not None:
            payload["max_tokens"] = cfg.max_output_tokens
        if tools:
            payload["tools"] = [{"type": "function", "function": t} for t in tools]

        last_exc: Exception | None = None
        for _ in range(self.max_retries + 1):
            try:
                resp = requests.post(
                    self.endpoint,
                    json=payload,
                    headers={"Authorization": f"Bearer {self.api_key}"},
                    timeout=self.timeout_s,
                )
            except requests.Timeout as exc:
                last_exc = BackendTimeout(str(exc))
                continue
            except requests.RequestException as exc:
                last_exc = BackendUnavailable(str(exc))
                continue
            if resp.status_code != 200:
                last_exc = BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
                if resp.status_code in (401, 403):
                    break  # credentials will not improve on retry
                continue
            return self._parse(resp.json())
        raise last_exc  # type: ignore[misc]

    @staticmethod
    def _parse(data: dict) -> tuple[ModelResponse, TokenUsage]:
        message = data["choices"][0]["message"]
        usage_doc = data.get("usage", {})
        usage = TokenUsage(
            int(usage_doc.get("prompt_tokens", usage_doc.get("input_tokens", 0))),
            int(usage_doc.get("completion_tokens", usage_doc.get("output_tokens", 0))),
        )
        tool_calls = message.get("tool_calls") or []
        if tool_calls:
            fn = tool_calls[0]["function"]
            args = fn.get("arguments", {})
            if isinstance(args, str):
                args = json.loads(args) if args else {}
            return ModelResponse(tool_call=ToolCallRequest(fn["name"], args)), usage
        return ModelResponse(text=message.get("content") or ""), usage
