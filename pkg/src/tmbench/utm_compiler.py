"""Compile binary Turing machines into 2-tag systems.

Instantaneous descriptions ``(Q, M, N)`` (left/right tape halves read as
binary numbers, least significant bit next to the head) are encoded as the
canonical word::

    A x (alpha x)^M  B x (beta x)^N

One TM step of a right-moving state is realized by six tag passes per state
(roles ``C c S s D1 D0 d1 d0 T1 T0 t1 t0``).  The parity of ``N`` decides,
through the alignment of the deletions, whether the ``D1`` or the ``D0``
branch is read and thus which successor state is written.

Left moves exchange the roles of ``M`` and ``N``.  Every state may own a
second, *swapped* family of word symbols (rendered with a ``~`` suffix) whose
word stores ``(N, M)`` instead of ``(M, N)``.  The six passes always double
the leading counter and halve the trailing one, so:

* a right-mover reads its direct family natively and writes its successor's
  direct family;
* a left-mover reads its swapped family natively and writes its successor's
  swapped family;
* a word in the other family is first rotated by one identity-copy pass over
  its leading half, which moves that half behind the other one.

Halting states own word families whose productions are empty: the tag system
drains and halts after the halting word is reached.
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Literal, Mapping, NamedTuple, Sequence

from . import tag_core
from .runlength import RunQueue
from .tag_core import Queue, Symbol, TagSystem

Direction = Literal["L", "R"]
Convention = Literal["direct", "swapped"]

WORD_ROLES = ("A", "x", "alpha", "B", "beta")
PIPELINE_ROLES = ("C", "c", "S", "s", "D1", "D0", "d1", "d0", "T1", "T0", "t1", "t0")
STATE_NAME = re.compile(r"^[A-Za-z0-9_.\-]+$")


class TmError(ValueError):
    pass


class TmParseError(TmError):
    pass


class CycleError(RuntimeError):
    """A tag cycle did not return to a canonical word."""


@dataclass(frozen=True)
class Quad:
    write: int
    direction: Direction
    next0: str
    next1: str


@dataclass(frozen=True)
class TuringMachine:
    states: tuple[str, ...]
    quads: Mapping[str, Quad]
    start: str
    halting: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        problems = machine_problems(self)
        if problems:
            raise TmError("; ".join(problems))

    def is_halting(self, state: str) -> bool:
        return state in self.halting


def machine_problems(tm: TuringMachine) -> list[str]:
    problems = []
    names = set(tm.states)
    if len(names) != len(tm.states):
        problems.append("duplicate state names")
    for name in tm.states:
        if not STATE_NAME.match(name):
            problems.append(f"bad state name {name!r}")
    if tm.start not in names:
        problems.append(f"start state {tm.start!r} is undefined")
    for h in tm.halting:
        if h not in names:
            problems.append(f"halting state {h!r} is undefined")
        if h in tm.quads:
            problems.append(f"halting state {h!r} must not have a transition")
    for name in tm.states:
        if name in tm.halting:
            continue
        quad = tm.quads.get(name)
        if quad is None:
            problems.append(f"state {name!r} has no transition")
            continue
        if quad.write not in (0, 1):
            problems.append(f"state {name!r}: write bit must be 0 or 1")
        if quad.direction not in ("L", "R"):
            problems.append(f"state {name!r}: direction must be L or R")
        for nxt in (quad.next0, quad.next1):
            if nxt not in names:
                problems.append(f"state {name!r} refers to undefined state {nxt!r}")
    for name in tm.quads:
        if name not in names:
            problems.append(f"transition for undeclared state {name!r}")
    return problems


@dataclass(frozen=True)
class TmConfig:
    state: str
    M: int
    N: int

    def __post_init__(self) -> None:
        if self.M < 0 or self.N < 0:
            raise ValueError("tape values must be non-negative")


def tm_step(tm: TuringMachine, cfg: TmConfig) -> TmConfig | None:
    """One step of the quadruple machine; ``None`` if ``cfg`` is halted."""
    if cfg.state not in tm.states:
        raise TmError(f"unknown state {cfg.state!r}")
    if tm.is_halting(cfg.state):
        return None
    q = tm.quads[cfg.state]
    if q.direction == "R":
        nxt = q.next1 if cfg.N & 1 else q.next0
        return TmConfig(nxt, 2 * cfg.M + q.write, cfg.N >> 1)
    nxt = q.next1 if cfg.M & 1 else q.next0
    return TmConfig(nxt, cfg.M >> 1, 2 * cfg.N + q.write)


# --- TM description files -------------------------------------------------

def parse_tm(text: str) -> TuringMachine:
    """Parse the line format documented in the README.

    ``start <state>``, ``halt <state>...`` and ``<state> <write> <L|R> <next0>
    <next1>`` records; ``#`` starts a comment.
    """
    start = None
    halting: list[str] = []
    quads: dict[str, Quad] = {}
    order: list[str] = []
    where: dict[str, int] = {}
    refs: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(":", " ").split()
        key = parts[0].lower()
        if key == "start":
            if len(parts) != 2:
                raise TmParseError(f"line {lineno}: expected 'start <state>'")
            start = parts[1]
            refs.append((lineno, start))
            continue
        if key == "halt":
            for h in parts[1:]:
                if h in where:
                    raise TmParseError(f"line {lineno}: state {h!r} declared twice")
                halting.append(h)
                order.append(h)
                where[h] = lineno
            continue
        if len(parts) != 5:
            raise TmParseError(f"line {lineno}: expected '<state> <write> <L|R> <next0> <next1>'")
        name, write, direction, n0, n1 = parts
        if not STATE_NAME.match(name):
            raise TmParseError(f"line {lineno}: bad state name {name!r}")
        if name in where:
            raise TmParseError(f"line {lineno}: state {name!r} declared twice")
        if write not in ("0", "1"):
            raise TmParseError(f"line {lineno}: write bit must be 0 or 1, got {write!r}")
        direction = direction.upper()
        if direction not in ("L", "R"):
            raise TmParseError(f"line {lineno}: direction must be L or R, got {direction!r}")
        quads[name] = Quad(int(write), direction, n0, n1)  # type: ignore[arg-type]
        order.append(name)
        where[name] = lineno
        refs += [(lineno, n0), (lineno, n1)]
    if start is None:
        raise TmParseError("missing 'start <state>' line")
    for lineno, ref in refs:
        if ref not in where:
            raise TmParseError(f"line {lineno}: undefined state {ref!r}")
    return TuringMachine(tuple(order), quads, start, frozenset(halting))


def format_tm(tm: TuringMachine) -> str:
    lines = [f"start {tm.start}"]
    if tm.halting:
        lines.append("halt " + " ".join(s for s in tm.states if s in tm.halting))
    for name in tm.states:
        if name in tm.quads:
            q = tm.quads[name]
            lines.append(f"{name} {q.write} {q.direction} {q.next0} {q.next1}")
    return "\n".join(lines) + "\n"


def random_machine(rng: random.Random, n_states: int, n_halting: int = 1) -> TuringMachine:
    names = [f"Q{i}" for i in range(n_states)]
    halts = [f"H{i}" for i in range(n_halting)]
    targets = names + halts
    quads = {
        n: Quad(rng.randint(0, 1), rng.choice("LR"), rng.choice(targets), rng.choice(targets))  # type: ignore[arg-type]
        for n in names
    }
    return TuringMachine(tuple(names + halts), quads, names[0], frozenset(halts))


# --- compilation ----------------------------------------------------------

class SymbolKey(NamedTuple):
    role: str
    state: str
    convention: Convention


def render_symbol(key: SymbolKey) -> Symbol:
    return f"{key.role}_{key.state}" + ("~" if key.convention == "swapped" else "")


@dataclass(frozen=True)
class TagProgram:
    tm: TuringMachine
    system: TagSystem
    symbol_table: Mapping[SymbolKey, Symbol]
    families: Mapping[str, tuple[Convention, ...]]
    reverse: Mapping[Symbol, SymbolKey] = field(repr=False, compare=False, default_factory=dict)

    def sym(self, role: str, state: str, convention: Convention = "direct") -> Symbol:
        return self.symbol_table[SymbolKey(role, state, convention)]

    def key(self, symbol: Symbol) -> SymbolKey | None:
        return self.reverse.get(symbol)

    @property
    def entry_heads(self) -> frozenset[Symbol]:
        """Symbols that can start a canonical word."""
        return frozenset(
            self.sym("A", s, conv) for s, convs in self.families.items() for conv in convs
        )


def _families(tm: TuringMachine) -> dict[str, tuple[Convention, ...]]:
    swapped = {n for n, q in tm.quads.items() if q.direction == "L"}
    swapped |= {t for q in tm.quads.values() if q.direction == "L" for t in (q.next0, q.next1)}
    return {s: ("direct", "swapped") if s in swapped else ("direct",) for s in tm.states}


def compile_tm(tm: TuringMachine) -> TagProgram:
    problems = machine_problems(tm)
    if problems:
        raise TmError("; ".join(problems))
    families = _families(tm)
    table: dict[SymbolKey, Symbol] = {}
    for state in tm.states:
        for conv in families[state]:
            for role in WORD_ROLES:
                table[SymbolKey(role, state, conv)] = ""
        if state in tm.quads:
            for role in PIPELINE_ROLES:
                table[SymbolKey(role, state, "direct")] = ""
    for key in table:
        table[key] = render_symbol(key)
    reverse = {v: k for k, v in table.items()}
    if len(reverse) != len(table):
        raise TmError("state names produce colliding symbols")

    def s(role: str, state: str, conv: Convention = "direct") -> Symbol:
        return table[SymbolKey(role, state, conv)]

    rules: dict[Symbol, tuple[Symbol, ...]] = {}
    for state in tm.states:
        for conv in families[state]:
            if state in tm.halting:
                for role in WORD_ROLES:
                    rules[s(role, state, conv)] = ()
            rules[s("x", state, conv)] = (s("x", state, conv),)
        if state in tm.halting:
            continue
        q = tm.quads[state]
        native: Convention = "direct" if q.direction == "R" else "swapped"
        other: Convention = "swapped" if native == "direct" else "direct"
        x = s("x", state)
        C, c = s("C", state), s("c", state)
        double_head = (C, x) if q.write == 0 else (C, x, c, x)
        # step 1/2: double the leading counter, turn the trailing one into singles
        rules[s("A", state, native)] = double_head
        rules[s("alpha", state, native)] = (c, x, c, x)
        rules[s("B", state, native)] = (s("S", state),)
        rules[s("beta", state, native)] = (s("s", state),)
        if other in families[state]:
            # rotation: copy the leading half behind the trailing one
            rules[s("A", state, other)] = (s("B", state, native), s("x", state, native))
            rules[s("alpha", state, other)] = (s("beta", state, native), s("x", state, native))
            rules[s("B", state, other)] = double_head
            rules[s("beta", state, other)] = (c, x, c, x)
        # step 3/4: pair up, then split on parity of the trailing counter
        rules[C] = (s("D1", state), s("D0", state))
        rules[c] = (s("d1", state), s("d0", state))
        rules[s("S", state)] = (s("T1", state), s("T0", state))
        rules[s("s", state)] = (s("t1", state), s("t0", state))
        # step 5/6: write the successor's word; the family follows our direction
        n1, n0 = q.next1, q.next0
        x1, x0 = s("x", n1, native), s("x", n0, native)
        rules[s("D1", state)] = (s("A", n1, native), x1)
        rules[s("d1", state)] = (s("alpha", n1, native), x1)
        rules[s("D0", state)] = (x0, s("A", n0, native), x0)
        rules[s("d0", state)] = (s("alpha", n0, native), x0)
        rules[s("T1", state)] = (s("B", n1, native), x1)
        rules[s("t1", state)] = (s("beta", n1, native), x1)
        rules[s("T0", state)] = (s("B", n0, native), x0)
        rules[s("t0", state)] = (s("beta", n0, native), x0)
    alphabet = tuple(table.values())
    system = TagSystem(2, alphabet, {sym: rules[sym] for sym in alphabet})
    return TagProgram(tm, system, table, families, reverse)


# --- encoding / decoding --------------------------------------------------

def canonical_runs(
    prog: TagProgram, cfg: TmConfig, convention: Convention = "direct"
) -> list[tuple[tuple[Symbol, ...], int]]:
    if convention not in prog.families.get(cfg.state, ()):
        raise TmError(f"state {cfg.state!r} has no {convention} family")
    lead, trail = (cfg.M, cfg.N) if convention == "direct" else (cfg.N, cfg.M)

    def sym(role: str) -> Symbol:
        return prog.sym(role, cfg.state, convention)

    x = sym("x")
    return [((sym("A"), x), 1), ((sym("alpha"), x), lead), ((sym("B"), x), 1), ((sym("beta"), x), trail)]


def encode_config(prog: TagProgram, cfg: TmConfig, convention: Convention = "direct") -> Queue:
    return tuple(s for root, k in canonical_runs(prog, cfg, convention) for _ in range(k) for s in root)


class CanonicalMatch(NamedTuple):
    config: TmConfig
    convention: Convention


class _Cursor:
    """Walks a run list, consuming whole runs when they match a repeated pair."""

    def __init__(self, runs: Sequence[tuple[Sequence[Symbol], int]]):
        self.runs = [(tuple(r), k) for r, k in runs if k > 0 and r]
        self.i = 0  # run index
        self.pos = 0  # symbol offset inside the current run (over all copies)

    def done(self) -> bool:
        return self.i >= len(self.runs)

    def peek(self) -> Symbol | None:
        if self.done():
            return None
        root, _ = self.runs[self.i]
        return root[self.pos % len(root)]

    def _advance(self, n: int) -> None:
        root, k = self.runs[self.i]
        self.pos += n
        if self.pos >= len(root) * k:
            self.i += 1
            self.pos = 0

    def take(self, sym: Symbol) -> bool:
        if self.peek() != sym:
            return False
        self._advance(1)
        return True

    def take_pairs(self, a: Symbol, b: Symbol) -> int:
        """Consume a maximal repetition of ``a b`` and return its length."""
        count = 0
        while not self.done():
            root, k = self.runs[self.i]
            if self.pos == 0 and root == (a, b):
                count += k
                self.i += 1
                continue
            if root == (a, b) and self.pos % 2 == 0:
                left = (len(root) * k - self.pos) // 2
                count += left
                self.i += 1
                self.pos = 0
                continue
            if self.peek() != a:
                break
            # irregular run: look ahead one symbol without committing
            save = (self.i, self.pos)
            self._advance(1)
            if self.peek() != b:
                self.i, self.pos = save
                break
            self._advance(1)
            count += 1
        return count


def match_runs(prog: TagProgram, runs: Sequence[tuple[Sequence[Symbol], int]]) -> CanonicalMatch | None:
    cur = _Cursor(runs)
    key = prog.key(cur.peek()) if not cur.done() else None
    if key is None or key.role != "A":
        return None
    state, conv = key.state, key.convention

    def sym(role: str) -> Symbol:
        return prog.sym(role, state, conv)

    x = sym("x")
    if not (cur.take(sym("A")) and cur.take(x)):
        return None
    lead = cur.take_pairs(sym("alpha"), x)
    if not (cur.take(sym("B")) and cur.take(x)):
        return None
    trail = cur.take_pairs(sym("beta"), x)
    if not cur.done():
        return None
    cfg = TmConfig(state, lead, trail) if conv == "direct" else TmConfig(state, trail, lead)
    return CanonicalMatch(cfg, conv)


def match_canonical(prog: TagProgram, queue: Sequence[Symbol]) -> CanonicalMatch | None:
    return match_runs(prog, [(tuple(queue), 1)])


def decode_word(prog: TagProgram, queue: Sequence[Symbol]) -> TmConfig | None:
    """The configuration a canonical word stores, or ``None``."""
    found = match_canonical(prog, queue)
    return found.config if found else None


# --- cycles ---------------------------------------------------------------

@dataclass
class CycleResult:
    match: CanonicalMatch
    tag_steps: int
    reads: dict[Symbol, int]
    runs: list[tuple[tuple[Symbol, ...], int]]

    def word(self) -> Queue:
        return tuple(s for root, k in self.runs for _ in range(k) for s in root)


def default_budget(cfg: TmConfig) -> int:
    return 16 * (cfg.M + cfg.N) + 64


def run_cycle(
    prog: TagProgram,
    word: Sequence[Symbol] | Sequence[tuple[Sequence[Symbol], int]],
    budget: int | None = None,
    *,
    engine: Literal["naive", "runs"] = "naive",
) -> CycleResult:
    """Run tag steps from a canonical word until the next canonical word.

    ``word`` is a flat queue, or a run list when ``engine="runs"``.  The naive
    engine calls :func:`tag_core.step` and decodes after every transition; the
    run engine is the same computation over run-length queues.
    """
    runs = _as_runs(word)
    start = match_runs(prog, runs)
    if start is None:
        raise CycleError("start word is not canonical")
    if budget is None:
        budget = default_budget(start.config)
    if budget < 1:
        raise ValueError("budget must be positive")
    if engine == "naive":
        return _cycle_naive(prog, tuple(s for r, k in runs for _ in range(k) for s in r), budget)
    if engine == "runs":
        return _cycle_runs(prog, runs, budget)
    raise ValueError(f"unknown engine {engine!r}")


def _as_runs(word) -> list[tuple[tuple[Symbol, ...], int]]:
    items = list(word)
    if items and isinstance(items[0], tuple) and len(items[0]) == 2 and isinstance(items[0][1], int):
        return [(tuple(r), k) for r, k in items]
    return [(tuple(items), 1)] if items else []


def _cycle_naive(prog: TagProgram, queue: Queue, budget: int) -> CycleResult:
    reads: dict[Symbol, int] = {}
    heads = prog.entry_heads
    q = queue
    for n in range(1, budget + 1):
        if len(q) >= 2:
            reads[q[0]] = reads.get(q[0], 0) + 1
        outcome = tag_core.step(prog.system, q)
        if outcome.halted:
            raise CycleError(f"tag system halted after {n - 1} steps before a canonical word")
        q = outcome.queue
        if q and q[0] in heads:
            found = match_canonical(prog, q)
            if found:
                return CycleResult(found, n, reads, [(q, 1)])
    raise CycleError(f"budget of {budget} tag steps exhausted")


def _cycle_runs(prog: TagProgram, runs, budget: int) -> CycleResult:
    rq = RunQueue(prog.system, runs)
    heads = prog.entry_heads
    while rq.steps < budget:
        status = rq.advance(budget - rq.steps, heads)
        if status == "halted":
            raise CycleError(f"tag system halted after {rq.steps} steps before a canonical word")
        if status == "stop":
            found = match_runs(prog, [(tuple(r), k) for r, k in rq.runs])
            if found:
                return CycleResult(found, rq.steps, dict(rq.reads), [(tuple(r), k) for r, k in rq.runs])
    raise CycleError(f"budget of {budget} tag steps exhausted")


# --- equivalence ----------------------------------------------------------

@dataclass
class EquivalenceReport:
    passed: bool
    tm_steps: int
    tag_steps: int
    halted_at: int | None = None
    divergence: str | None = None
    configs: list[TmConfig] = field(default_factory=list)

    def summary(self) -> str:
        if not self.passed:
            return f"FAIL after {self.tm_steps} TM steps: {self.divergence}"
        tail = f", halted at step {self.halted_at}" if self.halted_at is not None else ""
        return f"PASS {self.tm_steps} TM steps, {self.tag_steps} tag steps{tail}"


def verify_equivalence(
    tm: TuringMachine,
    cfg: TmConfig,
    steps: int,
    *,
    prog: TagProgram | None = None,
    engine: Literal["naive", "runs"] = "runs",
) -> EquivalenceReport:
    """Run the machine and its compiled tag system in lockstep."""
    if steps < 1:
        raise ValueError("steps must be positive")
    prog = prog or compile_tm(tm)
    direct = cfg
    runs = canonical_runs(prog, cfg)
    report = EquivalenceReport(True, 0, 0, configs=[cfg])
    for k in range(1, steps + 1):
        expected = tm_step(tm, direct)
        if expected is None:
            report.halted_at = k - 1
            if not _drains(prog, runs):
                report.passed = False
                report.divergence = f"step {k - 1}: halting word did not halt the tag system"
            return report
        word = runs if engine == "runs" else [s for r, n in runs for _ in range(n) for s in r]
        try:
            res = run_cycle(prog, word, default_budget(direct), engine=engine)
        except CycleError as exc:
            report.passed = False
            report.divergence = f"step {k}: expected {expected}, tag cycle failed: {exc}"
            return report
        report.tag_steps += res.tag_steps
        if res.match.config != expected:
            report.passed = False
            report.divergence = f"step {k}: expected {expected}, tag system decoded {res.match.config}"
            return report
        report.tm_steps = k
        report.configs.append(expected)
        direct = expected
        runs = res.runs
    if tm.is_halting(direct.state):
        report.halted_at = steps
        if not _drains(prog, runs):
            report.passed = False
            report.divergence = f"step {steps}: halting word did not halt the tag system"
    return report


def _drains(prog: TagProgram, runs) -> bool:
    rq = RunQueue(prog.system, runs)
    # empty productions: every step shrinks the queue
    return rq.advance(rq.length + 1) == "halted"


def expected_cycle_steps(tm: TuringMachine, cfg: TmConfig) -> int:
    """Tag steps of one cycle from the direct word of ``cfg`` (closed form)."""
    q = tm.quads[cfg.state]
    lead, trail = cfg.M, cfg.N
    rotation = 0
    if q.direction == "L":
        rotation = lead + 1
        lead, trail = trail, lead
    doubled = 2 * lead + q.write
    return rotation + (lead + 1) + (trail + 1) + (doubled + 1) + (trail // 2 + 1) + (doubled + 1) + (trail // 2 + 1)


def program_to_json(prog: TagProgram) -> tuple[dict, dict]:
    """``(system record, symbol-table sidecar)`` for serialization."""
    system = {
        "m": prog.system.m,
        "alphabet": list(prog.system.alphabet),
        "rules": {s: list(prog.system.rules[s]) for s in prog.system.alphabet},
    }
    sidecar = {
        "machine": format_tm(prog.tm),
        "families": {s: list(c) for s, c in prog.families.items()},
        "symbols": {
            sym: {"role": k.role, "state": k.state, "convention": k.convention}
            for k, sym in prog.symbol_table.items()
        },
    }
    return system, sidecar


def program_from_json(system: Mapping, sidecar: Mapping) -> TagProgram:
    prog = compile_tm(parse_tm(sidecar["machine"]))
    loaded = TagSystem.build(system["m"], system["alphabet"], system["rules"])
    if loaded != prog.system:
        raise TmError("compiled system does not match the stored machine")
    return prog

