"""Seeded benchmark instance generation.

Every random draw comes from a Mersenne Twister (:class:`random.Random`)
seeded with the first 8 bytes (big endian) of
``sha256(f"tmbench/{seed}/{index}/{field}/{attempt}")``, one stream per
(field, attempt) of an instance.  Integer seeding and ``randint``/``choice``
are stable across CPython releases, so a :class:`GenConfig` fully determines
the dataset bytes.
"""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .tag_core import Queue, Symbol, TagSystem, Trace, run, symbol_problem, validate_system

ALPHABETS: dict[str, tuple[Symbol, ...]] = {
    "roman": tuple("ABCDEFGHIJKLMNOPQRSTUVWXYZ"),
    "numeral": tuple(str(i) for i in range(1, 100)),
    "greek": tuple("αβγδεζηθικλμνξοπρστυφχψω"),
    # no brackets, commas, '*', '_' or '<': the transcript parser treats them as markup
    "special": tuple("@#$%&+=!?^~|/;"),
}
ALPHABET_KINDS = (*ALPHABETS, "custom")


def alphabet(kind: str, size: int, custom: Sequence[Symbol] = ()) -> tuple[Symbol, ...]:
    if size < 1:
        raise ValueError("alphabet size must be at least 1")
    if kind == "custom":
        pool = tuple(custom)
        for sym in pool:
            msg = symbol_problem(sym)
            if msg:
                raise ValueError(msg)
        if len(set(pool)) != len(pool):
            raise ValueError("custom alphabet has duplicate symbols")
    elif kind in ALPHABETS:
        pool = ALPHABETS[kind]
    else:
        raise ValueError(f"unknown alphabet kind {kind!r}")
    if size > len(pool):
        raise ValueError(f"alphabet {kind!r} has only {len(pool)} symbols, asked for {size}")
    return pool[:size]


@dataclass(frozen=True)
class GenConfig:
    m: int = 2
    alphabet_kind: str = "roman"
    alphabet_size: int = 5
    rule_len_min: int = 1
    rule_len_max: int = 5
    init_len_min: int = 2
    init_len_max: int = 9
    max_steps: int = 30
    count: int = 100
    seed: int = 0
    custom_symbols: tuple[Symbol, ...] = ()
    # optional rejection filter: resample until the run lasts this many steps
    min_steps: int = 0

    def problems(self) -> list[str]:
        out = []
        if self.m < 1:
            out.append("m must be >= 1")
        if self.alphabet_kind not in ALPHABET_KINDS:
            out.append(f"unknown alphabet kind {self.alphabet_kind!r}")
        else:
            try:
                alphabet(self.alphabet_kind, self.alphabet_size, self.custom_symbols)
            except ValueError as exc:
                out.append(str(exc))
        if not 1 <= self.rule_len_min <= self.rule_len_max:
            out.append("need 1 <= rule_len_min <= rule_len_max")
        if not 1 <= self.init_len_min <= self.init_len_max:
            out.append("need 1 <= init_len_min <= init_len_max")
        if self.max_steps < 1:
            out.append("max_steps must be positive")
        if self.count < 1:
            out.append("count must be positive")
        if not -(2**63) <= self.seed < 2**64:
            out.append("seed must fit in 64 bits")
        if not 0 <= self.min_steps <= self.max_steps:
            out.append("min_steps must lie in [0, max_steps]")
        return out

    def check(self) -> GenConfig:
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))
        return self

    @property
    def symbols(self) -> tuple[Symbol, ...]:
        return alphabet(self.alphabet_kind, self.alphabet_size, self.custom_symbols)


@dataclass(frozen=True)
class BenchmarkInstance:
    id: str
    system: TagSystem
    init: Queue
    max_steps: int
    trace: Trace

    @property
    def halted(self) -> bool:
        return self.trace.halt_step is not None

    @property
    def halt_step(self) -> int | None:
        return self.trace.halt_step

    @property
    def horizon(self) -> int:
        """Number of scored prediction steps."""
        return self.trace.transitions


def rng_for(seed: int, index: int, field: str, attempt: int = 0) -> random.Random:
    digest = hashlib.sha256(f"tmbench/{seed}/{index}/{field}/{attempt}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def instance_id(seed: int, index: int) -> str:
    return f"tm-{seed}-{index:05}"


def sample_system(cfg: GenConfig, index: int, attempt: int = 0) -> tuple[TagSystem, Queue]:
    symbols = cfg.symbols
    r = rng_for(cfg.seed, index, "rules", attempt)
    rules = {}
    for sym in symbols:
        n = r.randint(cfg.rule_len_min, cfg.rule_len_max)
        rules[sym] = tuple(r.choice(symbols) for _ in range(n))
    r = rng_for(cfg.seed, index, "init", attempt)
    n = r.randint(cfg.init_len_min, cfg.init_len_max)
    init = tuple(r.choice(symbols) for _ in range(n))
    return TagSystem(cfg.m, symbols, rules), init


def make_instance(cfg: GenConfig, index: int) -> BenchmarkInstance:
    attempt = 0
    while True:
        system, init = sample_system(cfg, index, attempt)
        trace = run(system, init, cfg.max_steps)
        if trace.transitions >= cfg.min_steps:
            return BenchmarkInstance(instance_id(cfg.seed, index), system, init, cfg.max_steps, trace)
        attempt += 1
        if attempt > 10_000:
            raise RuntimeError(f"no instance reaches {cfg.min_steps} steps for index {index}")


def generate_dataset(cfg: GenConfig) -> list[BenchmarkInstance]:
    cfg.check()
    return [make_instance(cfg, i) for i in range(cfg.count)]


# --- JSON lines -----------------------------------------------------------

def instance_to_record(inst: BenchmarkInstance) -> dict:
    sysm = inst.system
    return {
        "id": inst.id,
        "m": sysm.m,
        "alphabet": list(sysm.alphabet),
        "rules": {s: list(sysm.rules[s]) for s in sysm.alphabet},
        "init": list(inst.init),
        "max_steps": inst.max_steps,
        "trace": inst.trace.to_lists(),
        "halted": inst.halted,
        "halt_step": inst.halt_step,
    }


def instance_from_record(rec: dict, verify: bool = True) -> BenchmarkInstance:
    system = TagSystem.build(rec["m"], rec["alphabet"], rec["rules"])
    problems = validate_system(system)
    if problems:
        raise ValueError(f"{rec.get('id')}: " + "; ".join(problems))
    init = tuple(rec["init"])
    trace = run(system, init, rec["max_steps"])
    if verify:
        stored = [tuple(q) for q in rec["trace"]]
        if stored != list(trace.steps) or rec.get("halt_step") != trace.halt_step:
            raise ValueError(f"{rec['id']}: stored trace disagrees with the interpreter")
        if rec.get("halted") != (trace.halt_step is not None):
            raise ValueError(f"{rec['id']}: stored halted flag is wrong")
    return BenchmarkInstance(rec["id"], system, init, rec["max_steps"], trace)


def dumps_instance(inst: BenchmarkInstance) -> str:
    return json.dumps(instance_to_record(inst), ensure_ascii=False)


def write_dataset(path: str | Path, instances: Iterable[BenchmarkInstance]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for inst in instances:
            fh.write(dumps_instance(inst) + "\n")


def iter_dataset(path: str | Path, verify: bool = True) -> Iterator[BenchmarkInstance]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    yield instance_from_record(json.loads(line), verify)
                except (KeyError, TypeError, json.JSONDecodeError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad dataset record ({exc})") from exc


def read_dataset(path: str | Path, verify: bool = True) -> list[BenchmarkInstance]:
    return list(iter_dataset(path, verify))


def config_dict(cfg: GenConfig) -> dict:
    d = asdict(cfg)
    d["custom_symbols"] = list(cfg.custom_symbols)
    return d
