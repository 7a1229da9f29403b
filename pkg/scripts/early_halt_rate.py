"""Early-halt counts per seed for a generator configuration.

With the default benchmark settings the published dataset had 11/100
instances halting before the step budget; this shows how that number moves
with the seed.
"""
import argparse
from statistics import fmean, pstdev

from tmbench.instance_gen import GenConfig, generate_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--first-seed", type=int, default=0)
    ap.add_argument("--m", type=int, default=2)
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--max-steps", type=int, default=30)
    args = ap.parse_args()
    counts = []
    for seed in range(args.first_seed, args.first_seed + args.seeds):
        data = generate_dataset(GenConfig(m=args.m, count=args.count, max_steps=args.max_steps, seed=seed))
        n = sum(d.halted and d.halt_step < args.max_steps for d in data)
        counts.append(n)
        print(f"seed {seed}: {n}/{args.count} halt early")
    print(f"mean {fmean(counts):.2f}, sd {pstdev(counts):.2f}, range {min(counts)}-{max(counts)}")


if __name__ == "__main__":
    main()
