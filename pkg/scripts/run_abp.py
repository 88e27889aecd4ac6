"""Sweep the alternating-bit protocol over loss rates, duplication and capacity.

    python3 scripts/run_abp.py [--depth 6] [--branching]
"""
import argparse
from fractions import Fraction

from pptc.abp import run_abp

CONFIGS = [
    dict(loss=Fraction(1, 3)),
    dict(loss=Fraction(1, 2)),
    dict(loss=Fraction(9, 10)),
    dict(loss=Fraction(1, 3), dup=Fraction(1, 3)),
    dict(loss=Fraction(1, 2), capacity=2),
    dict(loss=Fraction(1, 2), hide=False),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depth", type=int, default=6)
    ap.add_argument("--branching", action="store_true", help="also run the rooted branching check")
    args = ap.parse_args()
    print(f"{'loss':>5} {'dup':>4} {'cap':>3} {'hide':>5} {'AB':>5} {'Buff':>4} {'traces':>7} "
          f"{'equal':>6} {'rbsb':>5} {'secs':>5}")
    for cfg in CONFIGS:
        rep = run_abp(depth=args.depth, branching=args.branching, **cfg)
        print(f"{rep.loss:>5} {rep.dup:>4} {rep.capacity:>3} {str(rep.hidden):>5} {rep.states_ab:>5} "
              f"{rep.states_buff:>4} {rep.traces_ab:>7} {str(rep.traces_equal):>6} "
              f"{str(rep.prbs_equivalent):>5} {rep.seconds:>5.2f}")


if __name__ == "__main__":
    main()
