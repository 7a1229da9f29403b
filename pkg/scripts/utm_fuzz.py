"""Fuzz the TM -> 2-tag compiler against direct TM stepping.

Each random machine is checked from several configurations in lockstep; the
summary reports tag steps per TM step, which grows with the counters.
"""
import argparse
import random
import time
from dataclasses import dataclass

from tmbench.utm_compiler import TmConfig, compile_tm, random_machine, verify_equivalence


@dataclass(frozen=True)
class FuzzConfig:
    machines: int = 100
    configs: int = 10
    tm_steps: int = 20
    min_states: int = 2
    max_states: int = 4
    max_counter: int = 64
    engine: str = "runs"
    seed: int = 0


def fuzz(cfg: FuzzConfig):
    rng = random.Random(cfg.seed)
    rows = []
    for k in range(cfg.machines):
        tm = random_machine(rng, rng.randint(cfg.min_states, cfg.max_states), rng.randint(1, 2))
        prog = compile_tm(tm)
        live = [s for s in tm.states if s not in tm.halting]
        for _ in range(cfg.configs):
            start = TmConfig(rng.choice(live), rng.randrange(cfg.max_counter), rng.randrange(cfg.max_counter))
            t0 = time.perf_counter()
            rep = verify_equivalence(tm, start, cfg.tm_steps, prog=prog, engine=cfg.engine)
            rows.append((k, start, rep, time.perf_counter() - t0, len(prog.system.alphabet)))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    for f, default in FuzzConfig.__dataclass_fields__.items():
        ap.add_argument("--" + f.replace("_", "-"), type=type(default.default), default=default.default)
    args = ap.parse_args()
    cfg = FuzzConfig(**vars(args))
    rows = fuzz(cfg)
    bad = [r for r in rows if not r[2].passed]
    for k, start, rep, _, _ in bad[:10]:
        print(f"machine {k} from {start}: {rep.summary()}")
    tm_steps = sum(r[2].tm_steps for r in rows)
    tag_steps = sum(r[2].tag_steps for r in rows)
    print(f"{len(rows) - len(bad)}/{len(rows)} runs passed; {tm_steps} TM steps, {tag_steps} tag steps "
          f"({tag_steps / max(tm_steps, 1):.1f} per TM step); mean alphabet {sum(r[4] for r in rows) / len(rows):.1f}; "
          f"{sum(r[3] for r in rows):.2f}s")


if __name__ == "__main__":
    main()
