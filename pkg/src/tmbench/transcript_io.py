"""Prompt rendering, reference transcripts and transcript parsing."""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

from .instance_gen import BenchmarkInstance
from .tag_core import Queue, format_queue

TEMPLATE_VERSION = "v1"
SLOTS = ("{m}", "{ALPHABET}", "{INIT}", "{RULES}", "{MAX_STEPS}")


def load_template(version: str = TEMPLATE_VERSION) -> str:
    return resources.files("tmbench.assets").joinpath(f"prompt_template_{version}.txt").read_text("utf-8")


def render_prompt(inst: BenchmarkInstance, template: str | None = None) -> str:
    text = load_template() if template is None else template
    sysm = inst.system
    values = {
        "{m}": str(sysm.m),
        "{ALPHABET}": "{" + ", ".join(sysm.alphabet) + "}",
        "{INIT}": format_queue(inst.init),
        "{RULES}": "\n".join(f"{s} : {' '.join(sysm.rules[s])}".rstrip() for s in sysm.alphabet),
        "{MAX_STEPS}": str(inst.max_steps),
    }
    # slot values may contain brace text, so substitute in a single pass
    return re.sub("|".join(re.escape(s) for s in SLOTS), lambda mt: values[mt.group(0)], text)


def format_ground_truth(inst: BenchmarkInstance) -> str:
    """The instance's true trace written in the model response format."""
    m = inst.system.m
    steps = inst.trace.steps
    halt = inst.trace.halt_step
    lines = ["Simulation steps:"]
    for i, q in enumerate(steps):
        lines.append(f"### step {i}:")
        if i == 0:
            lines.append("- Action: Init")
        else:
            prev = steps[i - 1]
            appended = " ".join(inst.system.rules[prev[0]]) or "nothing"
            lines.append(f"- Head Symbol: {prev[0]}")
            lines.append(f"- Action: Append {appended} to the end of the queue. Remove {' '.join(prev[:m])} from the head.")
        lines.append(f"- Queue State: {format_queue(q)}" + (" <halt>" if halt == i else ""))
    return "\n".join(lines) + "\n"


@dataclass
class PredictedTrace:
    steps: list[tuple[int, Queue]] = field(default_factory=list)
    halt_claimed_at: int | None = None
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict[int, Queue]:
        return dict(self.steps)

    @property
    def last_step(self) -> int | None:
        return self.steps[-1][0] if self.steps else None


_STEP = re.compile(r"^[\s#>*_`\-]*step\s*(\d+)\b", re.IGNORECASE)
_QUEUE = re.compile(r"queue\s*state[\s*_`:]*\[([^\]\n]*)\]([^\n]*)", re.IGNORECASE)
_HALT = re.compile(r"<\s*halt\s*>", re.IGNORECASE)


def _symbols(body: str) -> Queue:
    return tuple(body.replace(",", " ").split())


def parse_transcript(text: str) -> PredictedTrace:
    """Extract the per-step queues from a model response.

    Each ``step k`` header opens a block; the block's last ``Queue State: [...]``
    line is its answer.  Out-of-order or repeated step numbers are dropped with
    a warning (first occurrence wins).
    """
    out = PredictedTrace()
    if not isinstance(text, str):
        out.warnings.append("no steps found")
        return out
    blocks: list[tuple[int, list[str]]] = []
    stray = False
    for line in text.splitlines():
        head = _STEP.match(line)
        if head:
            blocks.append((int(head.group(1)), []))
        elif blocks:
            blocks[-1][1].append(line)
        elif _QUEUE.search(line):
            stray = True
    if stray:
        out.warnings.append("queue lines before the first step header were ignored")
    last = -1
    for index, lines in blocks:
        found = [mt for ln in lines for mt in _QUEUE.finditer(ln)]
        if not found:
            out.warnings.append(f"step {index}: no queue state")
            continue
        if len(found) > 1:
            out.warnings.append(f"step {index}: {len(found)} queue states, using the last")
        if index <= last:
            out.warnings.append(f"step {index}: out of order or repeated, ignored")
            continue
        mt = found[-1]
        out.steps.append((index, _symbols(mt.group(1))))
        last = index
        if out.halt_claimed_at is None and any(_HALT.search(ln) for ln in lines):
            out.halt_claimed_at = index
    if not out.steps:
        out.warnings.append("no steps found")
    return out


# --- transcript files -----------------------------------------------------

@dataclass
class TranscriptRecord:
    id: str
    model: str
    prompt: str
    response: str | None
    usage: dict[str, int | None] = field(default_factory=lambda: {"prompt_tokens": None, "completion_tokens": None})
    error: str | None = None
    attempts: int = 1

    def to_json(self) -> str:
        rec = {
            "id": self.id,
            "model": self.model,
            "prompt": self.prompt,
            "response": self.response,
            "usage": {"prompt_tokens": self.usage.get("prompt_tokens"),
                      "completion_tokens": self.usage.get("completion_tokens")},
            "error": self.error,
            "attempts": self.attempts,
        }
        return json.dumps(rec, ensure_ascii=False)

    @classmethod
    def from_dict(cls, rec: dict) -> TranscriptRecord:
        usage = rec.get("usage") or {}
        return cls(
            id=rec["id"],
            model=rec.get("model", ""),
            prompt=rec.get("prompt", ""),
            response=rec.get("response"),
            usage={"prompt_tokens": usage.get("prompt_tokens"), "completion_tokens": usage.get("completion_tokens")},
            error=rec.get("error"),
            attempts=rec.get("attempts", 1),
        )


def iter_transcripts(path: str | Path) -> Iterator[TranscriptRecord]:
    """Yield records; a torn final line (interrupted write) is skipped."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.endswith("\n"):
                break
            if line.strip():
                yield TranscriptRecord.from_dict(json.loads(line))


def read_transcripts(path: str | Path) -> dict[str, TranscriptRecord]:
    return {rec.id: rec for rec in iter_transcripts(path)}


def write_transcripts(path: str | Path, records: Iterable[TranscriptRecord]) -> None:
    """Write records sorted by id, replacing the file atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for rec in sorted(records, key=lambda r: r.id):
            fh.write(rec.to_json() + "\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def ground_truth_records(instances: Iterable[BenchmarkInstance], model: str = "ground-truth") -> list[TranscriptRecord]:
    return [
        TranscriptRecord(inst.id, model, render_prompt(inst), format_ground_truth(inst))
        for inst in instances
    ]
