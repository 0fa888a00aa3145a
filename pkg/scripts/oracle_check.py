"""Compare every estimator against the brute-force residual minimizer, pattern by pattern.

The oracle needs no model of the estimators; it searches the step that best
reconstructs the second frame from the first. Large gaps between an estimator
and the oracle point at the estimator, gaps between the oracle and the true
step point at the normalizer.
"""

import argparse
import math

from twostep.bench import ExperimentSpec, cell_pair, oracle_step
from twostep.estimators import STANDARD_TWELVE, estimate
from twostep.errors import TwoStepError
from twostep.normalize import gfb_normalize


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sigma", type=float, default=0.5)
    ap.add_argument("--delta", type=float, default=math.pi / 3)
    ap.add_argument("--patterns", type=int, default=3)
    ap.add_argument("--size", type=int, default=512)
    args = ap.parse_args(argv)

    spec = ExperimentSpec(pattern_count=args.patterns, noise_levels=(args.sigma,), steps=(args.delta,),
                          field_size=args.size)
    print(f"{'pattern':>7s} {'oracle-true':>12s}  " + " ".join(f"{n:>7s}" for n in STANDARD_TWELVE))
    for j in range(spec.pattern_count):
        pair = gfb_normalize(cell_pair(spec, j, 0, 0))
        ref = oracle_step(pair)
        gaps = []
        for n in STANDARD_TWELVE:
            try:
                gaps.append(f"{estimate(n, pair).delta - ref:+7.4f}")
            except TwoStepError as exc:
                gaps.append(f"{type(exc).__name__[:7]:>7s}")
        print(f"{j:7d} {ref - args.delta:+12.5f}  " + " ".join(gaps))


if __name__ == "__main__":
    main()
