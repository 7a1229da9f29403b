"""m-tag system semantics: validation, single steps and bounded runs.

A queue is a tuple of symbols with the head at index 0.  One step reads the
head symbol, appends its production to the tail and deletes ``m`` symbols
from the head.  A queue shorter than ``m`` is halted.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

Symbol = str
Queue = tuple[Symbol, ...]

_BAD_SYMBOL = re.compile(r"[\s\[\]]")


class MalformedInput(ValueError):
    """A queue or system refers to symbols outside the alphabet."""


@dataclass(frozen=True)
class TagSystem:
    m: int
    alphabet: tuple[Symbol, ...]
    rules: Mapping[Symbol, tuple[Symbol, ...]]

    @classmethod
    def build(
        cls,
        m: int,
        alphabet: Iterable[Symbol],
        rules: Mapping[Symbol, Iterable[Symbol]],
    ) -> TagSystem:
        """Normalize containers; no validation (see :func:`validate_system`)."""
        return cls(m, tuple(alphabet), {k: tuple(v) for k, v in rules.items()})

    def production(self, symbol: Symbol) -> tuple[Symbol, ...]:
        try:
            return self.rules[symbol]
        except KeyError:
            raise MalformedInput(f"symbol {symbol!r} has no production rule") from None


class StepOutcome(NamedTuple):
    halted: bool
    queue: Queue


@dataclass(frozen=True)
class Trace:
    """Queue states of one run; ``steps[i]`` is the queue after transition i."""

    steps: tuple[Queue, ...]
    halt_step: int | None
    truncated: bool

    @property
    def final(self) -> Queue:
        return self.steps[-1]

    @property
    def transitions(self) -> int:
        return len(self.steps) - 1

    def to_lists(self) -> list[list[Symbol]]:
        return [list(q) for q in self.steps]


def symbol_problem(symbol: object) -> str | None:
    if not isinstance(symbol, str) or not symbol:
        return f"symbol {symbol!r} must be a non-empty string"
    if _BAD_SYMBOL.search(symbol):
        return f"symbol {symbol!r} contains whitespace or a bracket"
    return None


def validate_system(system: TagSystem) -> list[str]:
    """Return the list of violated well-formedness conditions (empty if ok)."""
    problems: list[str] = []
    if not isinstance(system.m, int) or system.m < 1:
        problems.append(f"m must be >= 1 (got {system.m!r})")
    seen: set[Symbol] = set()
    for sym in system.alphabet:
        msg = symbol_problem(sym)
        if msg:
            problems.append(msg)
        if sym in seen:
            problems.append(f"duplicate alphabet symbol {sym!r}")
        seen.add(sym)
    for sym in system.alphabet:
        if sym not in system.rules:
            problems.append(f"missing production rule for {sym!r}")
    for sym, word in system.rules.items():
        if sym not in seen:
            problems.append(f"rule for {sym!r} which is not in the alphabet")
        for out in word:
            if out not in seen:
                problems.append(f"rule {sym!r} produces {out!r} which is not in the alphabet")
    return problems


def check_queue(system: TagSystem, queue: Sequence[Symbol]) -> Queue:
    q = tuple(queue)
    for sym in q:
        if sym not in system.rules:
            raise MalformedInput(f"queue symbol {sym!r} is not in the alphabet")
    return q


def step(system: TagSystem, queue: Sequence[Symbol]) -> StepOutcome:
    q = check_queue(system, queue)
    if len(q) < system.m:
        return StepOutcome(True, q)
    return StepOutcome(False, q[system.m:] + system.rules[q[0]])


def run(system: TagSystem, init: Sequence[Symbol], max_steps: int) -> Trace:
    problems = validate_system(system)
    if problems:
        raise MalformedInput("; ".join(problems))
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    q = check_queue(system, init)
    m, rules = system.m, system.rules
    states = [q]
    # halt is checked before reading, so a short init halts at step 0
    while len(q) >= m and len(states) <= max_steps:
        q = q[m:] + rules[q[0]]
        states.append(q)
    halted = len(q) < m
    return Trace(tuple(states), len(states) - 1 if halted else None, not halted)


def format_queue(queue: Iterable[Symbol]) -> str:
    return "[" + " ".join(queue) + "]"


def parse_queue(text: str) -> Queue:
    s = text.strip()
    if not (s.startswith("[") and s.endswith("]")):
        raise ValueError(f"queue must be bracketed: {text!r}")
    return tuple(s[1:-1].split())


def format_trace(trace: Trace, m: int) -> str:
    """Table-1 style listing: ``i. [queue]`` with the deleted head marked."""
    lines = []
    for i, q in enumerate(trace.steps):
        if i == 0:
            note = " (Init)"
            if trace.halt_step == 0:
                note += " (Halt)"
        else:
            note = " (Halt)" if trace.halt_step == i else ""
        if i == 0:
            lines.append(f"{i}. {format_queue(q)}{note}")
        else:
            removed = " ".join(trace.steps[i - 1][:m])
            lines.append(f"{i}. {format_queue(q)}  (removed {removed}){note}")
    return "\n".join(lines)
