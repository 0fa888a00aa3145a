"""Median wall time per normalizer and estimator on one field (reported, never asserted)."""

import argparse

from twostep.bench import ExperimentSpec, timing_report


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=512)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)

    spec = ExperimentSpec(field_size=args.size, normalizers=("gfb", "baseline"))
    for r in sorted(timing_report(spec, repeats=args.repeats), key=lambda r: (r.kind != "normalizer", r.seconds)):
        print(f"{r.kind:10s} {r.name:8s} {r.normalizer:9s} {r.seconds * 1e3:9.2f} ms")


if __name__ == "__main__":
    main()
