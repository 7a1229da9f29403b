"""Run-length tag interpreter.

Compiled UTM words are made of long repetitions such as ``(alpha x)^M``, and
``M`` doubles on every rightward move.  Stepping symbol by symbol is linear in
the counter value; this engine keeps the queue as runs ``(root, count)`` and
consumes whole periods of a run at once.  For a run with root length ``L``,
``lcm(L, m)`` symbols always produce the same reads, so ``j`` such blocks
append ``j`` copies of one fixed word.  The result is exactly what repeated
:func:`tmbench.tag_core.step` calls would give.
"""
from __future__ import annotations

from collections import Counter, deque
from math import lcm
from typing import Iterable, Iterator, Sequence

from .tag_core import MalformedInput, Queue, Symbol, TagSystem

Run = list  # [root: tuple[Symbol, ...], count: int]


def primitive_root(word: tuple[Symbol, ...]) -> tuple[tuple[Symbol, ...], int]:
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word[:p] * (n // p) == word:
            return word[:p], n // p
    return word, 1


class RunQueue:
    """Mutable queue of runs driven by a fixed tag system."""

    def __init__(self, system: TagSystem, runs: Iterable[tuple[Sequence[Symbol], int]] = ()):
        self.system = system
        self.runs: deque[Run] = deque()
        self.length = 0
        self.steps = 0
        self.reads: Counter[Symbol] = Counter()
        self._block_cache: dict[tuple[Symbol, ...], tuple[int, tuple[Symbol, ...], tuple[Symbol, ...]]] = {}
        for root, count in runs:
            self.append(tuple(root), count)

    @classmethod
    def from_queue(cls, system: TagSystem, queue: Sequence[Symbol]) -> RunQueue:
        rq = cls(system)
        for sym in queue:
            rq.append((sym,), 1)
        return rq

    def append(self, word: tuple[Symbol, ...], count: int = 1) -> None:
        if not word or count <= 0:
            return
        for sym in word:
            if sym not in self.system.rules:
                raise MalformedInput(f"symbol {sym!r} is not in the alphabet")
        root, k = primitive_root(word)
        count *= k
        if self.runs and self.runs[-1][0] == root:
            self.runs[-1][1] += count
        else:
            self.runs.append([root, count])
        self.length += len(root) * count

    def head(self) -> Symbol | None:
        return self.runs[0][0][0] if self.runs else None

    def delete(self, n: int) -> None:
        self.length -= n
        runs = self.runs
        while n:
            root, count = runs[0]
            size = len(root) * count
            if n >= size:
                runs.popleft()
                n -= size
                continue
            whole, off = divmod(n, len(root))
            runs[0][1] -= whole
            if off:
                runs[0][1] -= 1
                if runs[0][1] == 0:
                    runs.popleft()
                runs.appendleft([root[off:], 1])
            n = 0

    def symbols(self) -> Iterator[Symbol]:
        for root, count in self.runs:
            for _ in range(count):
                yield from root

    def to_queue(self) -> Queue:
        return tuple(self.symbols())

    def _block(self, root: tuple[Symbol, ...]) -> tuple[int, tuple[Symbol, ...], tuple[Symbol, ...]]:
        cached = self._block_cache.get(root)
        if cached is None:
            m = self.system.m
            span = lcm(len(root), m)
            expanded = root * (span // len(root))
            heads = expanded[::m]
            produced: tuple[Symbol, ...] = ()
            for sym in heads:
                produced += self.system.rules[sym]
            cached = (span, heads, produced)
            self._block_cache[root] = cached
        return cached

    def _realign(self) -> None:
        # w r^k == r'^k w when w = r[j:] and r' = r[j:] + r[:j]
        runs = self.runs
        if len(runs) < 2 or runs[0][1] != 1:
            return
        w = runs[0][0]
        r, k = runs[1]
        j = len(r) - len(w)
        if j <= 0 or r[j:] != w:
            return
        runs.popleft()
        runs.popleft()
        rotated, mult = primitive_root(w + r[:j])
        runs.appendleft([w, 1])
        runs.appendleft([rotated, k * mult])

    def single_step(self) -> bool:
        """One ordinary transition; returns False if the queue is halted."""
        if self.length < self.system.m:
            return False
        sym = self.runs[0][0][0]
        self.reads[sym] += 1
        self.append(self.system.rules[sym])
        self.delete(self.system.m)
        self.steps += 1
        return True

    def advance(self, max_steps: int, stop_heads: frozenset[Symbol] = frozenset()) -> str:
        """Advance by at most ``max_steps`` transitions.

        Returns ``"halted"``, ``"budget"``, or ``"stop"`` when, after at least one
        transition, the head symbol is in ``stop_heads``.  Runs whose root
        contains a stop symbol are stepped singly, so no stop point is skipped.
        """
        target = self.steps + max_steps
        moved = False
        while True:
            if moved and self.runs and self.runs[0][0][0] in stop_heads:
                return "stop"
            if self.length < self.system.m:
                return "halted"
            left = target - self.steps
            if left <= 0:
                return "budget"
            self._realign()
            root, count = self.runs[0]
            blocks = 0
            if stop_heads.isdisjoint(root):
                span, heads, produced = self._block(root)
                blocks = min((len(root) * count) // span, left // len(heads))
            if blocks:
                for sym in heads:
                    self.reads[sym] += blocks
                # consume before appending: the head run may also be the tail run
                self.delete(span * blocks)
                self.append(produced, blocks)
                self.steps += len(heads) * blocks
            else:
                self.single_step()
            moved = True
