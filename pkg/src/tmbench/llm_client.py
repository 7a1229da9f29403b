"""Batch evaluation over an OpenAI-compatible chat-completion endpoint."""
from __future__ import annotations

import asyncio
import logging
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Sequence

import httpx
import yaml

from .instance_gen import BenchmarkInstance
from .transcript_io import TranscriptRecord, iter_transcripts, render_prompt, write_transcripts

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 4
    initial_backoff: float = 1.0
    multiplier: float = 2.0

    def delay(self, attempt: int) -> float:
        """Sleep before attempt ``attempt + 1`` (attempts count from 1)."""
        return self.initial_backoff * self.multiplier ** (attempt - 1)


@dataclass(frozen=True)
class RunnerConfig:
    base_url: str = "https://api.openai.com/v1"
    model: str = ""
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    top_p: float = 1.0
    max_output_tokens: int = 16384
    max_in_flight: int = 8
    timeout: float = 600.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    def problems(self) -> list[str]:
        out = []
        if not self.model:
            out.append("model is required")
        if not self.base_url.startswith(("http://", "https://")):
            out.append("base_url must be an http(s) URL")
        if self.max_in_flight < 1:
            out.append("max_in_flight must be >= 1")
        if self.temperature < 0:
            out.append("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            out.append("top_p must lie in (0, 1]")
        if self.max_output_tokens < 1:
            out.append("max_output_tokens must be positive")
        if self.retry.max_attempts < 1:
            out.append("retry.max_attempts must be >= 1")
        if self.retry.initial_backoff < 0 or self.retry.multiplier < 1:
            out.append("retry backoff must be non-negative and non-shrinking")
        if self.timeout <= 0:
            out.append("timeout must be positive")
        return out

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise ConfigError(f"environment variable {self.api_key_env} is not set")
        return key

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> RunnerConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "retry" in data:
            data["retry"] = RetryPolicy(**data["retry"])
        cfg = cls(**data)
        problems = cfg.problems()
        if problems:
            raise ConfigError("; ".join(problems))
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> RunnerConfig:
        data = yaml.safe_load(Path(path).read_text("utf-8")) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping")
        return cls.from_mapping(data)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class CallResult:
    id: str
    response: str | None
    error: str | None
    attempts: int
    latency: float
    usage: dict[str, int | None] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None


def request_body(cfg: RunnerConfig, prompt: str) -> dict[str, Any]:
    return {
        "model": cfg.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": cfg.temperature,
        "top_p": cfg.top_p,
        "max_tokens": cfg.max_output_tokens,
    }


def _retryable(status: int) -> bool:
    return status == 429 or status >= 500


async def acomplete(
    client: httpx.AsyncClient,
    cfg: RunnerConfig,
    prompt: str,
    *,
    key: str,
    id: str = "",
    sleep: Callable[[float], Any] = asyncio.sleep,
) -> CallResult:
    url = cfg.base_url.rstrip("/") + "/chat/completions"
    headers = {"Authorization": f"Bearer {key}"}
    body = request_body(cfg, prompt)
    t0 = time.monotonic()
    error = "no attempt made"
    attempt = 0
    for attempt in range(1, cfg.retry.max_attempts + 1):
        try:
            resp = await client.post(url, json=body, headers=headers, timeout=cfg.timeout)
        except httpx.TimeoutException as exc:
            error = f"timeout: {exc!r}"
        except httpx.TransportError as exc:
            error = f"transport: {exc!r}"
        else:
            if resp.status_code in (401, 403):
                return CallResult(id, None, f"auth: HTTP {resp.status_code}", attempt, time.monotonic() - t0)
            if resp.status_code == 200:
                try:
                    data = resp.json()
                    text = data["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    return CallResult(id, None, f"bad_response: {exc!r}", attempt, time.monotonic() - t0)
                usage = data.get("usage") or {}
                return CallResult(
                    id, text or "", None, attempt, time.monotonic() - t0,
                    {"prompt_tokens": usage.get("prompt_tokens"), "completion_tokens": usage.get("completion_tokens")},
                )
            error = f"http: HTTP {resp.status_code}"
            if not _retryable(resp.status_code):
                return CallResult(id, None, error, attempt, time.monotonic() - t0)
        if attempt < cfg.retry.max_attempts:
            log.info("%s: attempt %d failed (%s), retrying", id or "request", attempt, error)
            await sleep(cfg.retry.delay(attempt))
    return CallResult(id, None, f"retries_exhausted: {error}", attempt, time.monotonic() - t0)


def complete(cfg: RunnerConfig, prompt: str, *, transport: httpx.AsyncBaseTransport | None = None) -> CallResult:
    """Send one prompt and wait for the result."""
    key = cfg.api_key()

    async def go() -> CallResult:
        async with httpx.AsyncClient(transport=transport) as client:
            return await acomplete(client, cfg, prompt, key=key)

    return asyncio.run(go())


def _drop_torn_tail(path: Path) -> None:
    data = path.read_bytes()
    if data and not data.endswith(b"\n"):
        keep = data.rfind(b"\n") + 1
        with open(path, "r+b") as fh:
            fh.truncate(keep)


def _existing(path: Path, retry_errors: bool) -> dict[str, TranscriptRecord]:
    if not path.exists():
        return {}
    _drop_torn_tail(path)
    done = {}
    for rec in iter_transcripts(path):
        if retry_errors and rec.error is not None:
            continue
        done[rec.id] = rec
    return done


async def arun_benchmark(
    cfg: RunnerConfig,
    dataset: Sequence[BenchmarkInstance],
    out: str | Path,
    *,
    transport: httpx.AsyncBaseTransport | None = None,
    retry_errors: bool = False,
    sleep: Callable[[float], Any] = asyncio.sleep,
) -> list[TranscriptRecord]:
    problems = cfg.problems()
    if problems:
        raise ConfigError("; ".join(problems))
    if not dataset:
        raise ConfigError("dataset is empty")
    key = cfg.api_key()
    out = Path(out)
    done = _existing(out, retry_errors)
    todo = [inst for inst in dataset if inst.id not in done]
    log.info("%d instances, %d already recorded, %d to request", len(dataset), len(done), len(todo))
    gate = asyncio.Semaphore(cfg.max_in_flight)
    records = dict(done)
    # completed records are appended one line at a time so an interrupted run
    # leaves a readable file; the final rewrite sorts by id
    if out.exists() and retry_errors:
        write_transcripts(out, done.values())
    with open(out, "a", encoding="utf-8", newline="\n") as journal:

        async def one(client: httpx.AsyncClient, inst: BenchmarkInstance) -> None:
            prompt = render_prompt(inst)
            async with gate:
                res = await acomplete(client, cfg, prompt, key=key, id=inst.id, sleep=sleep)
            rec = TranscriptRecord(
                inst.id, cfg.model, prompt, res.response,
                res.usage or {"prompt_tokens": None, "completion_tokens": None},
                res.error, res.attempts,
            )
            records[inst.id] = rec
            journal.write(rec.to_json() + "\n")
            journal.flush()

        limits = httpx.Limits(max_connections=cfg.max_in_flight)
        async with httpx.AsyncClient(transport=transport, limits=limits) as client:
            await asyncio.gather(*(one(client, inst) for inst in todo))
    ordered = [records[inst.id] for inst in dataset if inst.id in records]
    write_transcripts(out, ordered)
    return sorted(ordered, key=lambda r: r.id)


def run_benchmark(
    cfg: RunnerConfig,
    dataset: Sequence[BenchmarkInstance],
    out: str | Path,
    *,
    transport: httpx.AsyncBaseTransport | None = None,
    retry_errors: bool = False,
) -> list[TranscriptRecord]:
    return asyncio.run(arun_benchmark(cfg, dataset, out, transport=transport, retry_errors=retry_errors))
