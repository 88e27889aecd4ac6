"""Run the randomized axiom suite and print the per-axiom table.

    python3 scripts/run_axiom_suite.py --seed 0 --count 50 [--json out.json]
"""
import argparse
import json

from pptc.axioms import run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--only", nargs="*", default=None, help="axiom names")
    ap.add_argument("--json", default=None, help="also write the report here")
    args = ap.parse_args()
    rep = run_suite(args.seed, args.count, names=set(args.only) if args.only else None)
    print(rep.text())
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rep.to_dict(), fh, indent=2, sort_keys=True)
    raise SystemExit(0 if rep.all_passed else 1)


if __name__ == "__main__":
    main()
