"""Print the three worked 2-tag traces (Roman, numeral, special) side by side."""
import argparse
import json
from importlib import resources

from tmbench.tag_core import TagSystem, format_trace, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=30)
    ap.add_argument("--only", choices=("roman", "numeral", "special"))
    args = ap.parse_args()
    examples = json.loads(resources.files("tmbench.assets").joinpath("worked_examples.json").read_text("utf-8"))
    for name, rec in examples.items():
        if args.only and name != args.only:
            continue
        system = TagSystem.build(rec["m"], rec["alphabet"], rec["rules"])
        trace = run(system, rec["init"], args.steps)
        print(f"== {name}: alphabet {{{', '.join(system.alphabet)}}}")
        for sym in system.alphabet:
            print(f"   {sym} : {' '.join(system.rules[sym])}")
        print(format_trace(trace, system.m))
        print()


if __name__ == "__main__":
    main()
