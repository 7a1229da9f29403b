"""How the deletion number m shapes generated instances.

For each m: mean per-step queue growth (expected: mean rule length - m),
early-halt fraction and mean number of steps before halting or the budget.
"""
import argparse
import csv
import sys
from statistics import fmean

from tmbench.instance_gen import GenConfig, generate_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ms", default="1,2,3,4,5,6,8,10,15")
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--rule-len-max", type=int, default=5)
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["m", "expected_growth", "mean_growth", "early_halt_frac", "mean_steps"])
    for m in (int(x) for x in args.ms.split(",")):
        cfg = GenConfig(m=m, count=args.count, seed=args.seed, rule_len_max=args.rule_len_max,
                        init_len_min=2, init_len_max=max(9, m + 1))
        data = generate_dataset(cfg)
        growth = [len(b) - len(a) for d in data for a, b in zip(d.trace.steps, d.trace.steps[1:])]
        early = sum(d.halted and d.halt_step < cfg.max_steps for d in data) / len(data)
        w.writerow([m, (1 + args.rule_len_max) / 2 - m, f"{fmean(growth):.3f}" if growth else "",
                    f"{early:.3f}", f"{fmean(d.trace.transitions for d in data):.2f}"])


if __name__ == "__main__":
    main()
