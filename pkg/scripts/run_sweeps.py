"""Run the noise sweep (A) and/or the step sweep (B) and print an MAE table.

    python scripts/run_sweeps.py --sweep a --out runs/a
    python scripts/run_sweeps.py --sweep b --size 256 --patterns 4   # quick look
"""

import argparse
import math
import sys
import time
from pathlib import Path

from twostep.bench import run_experiment, sweep_a, sweep_b
from twostep.imageio import ensure_dir


def mae_table(rep, axis_values, key, label):
    names = sorted({r.estimator for r in rep.rows})
    head = f"{'estimator':10s}" + "".join(f"{label(v):>10s}" for v in axis_values)
    lines = [head]
    for n in names:
        cells = []
        for v in axis_values:
            m = key(rep, n, v)
            cells.append(f"{m:10.4f}" if not math.isnan(m) else f"{'nan':>10s}")
        bad = len(rep.failures(n))
        lines.append(f"{n:10s}" + "".join(cells) + (f"   ({bad} failed rows)" if bad else ""))
    return "\n".join(lines)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sweep", choices=("a", "b", "both"), default="both")
    ap.add_argument("--size", type=int, default=512)
    ap.add_argument("--patterns", type=int, default=10)
    ap.add_argument("--seed", type=int, default=2020)
    ap.add_argument("--out", type=Path, default=None, help="directory for report CSVs")
    args = ap.parse_args(argv)

    kw = dict(field_size=args.size, pattern_count=args.patterns, master_seed=args.seed)
    todo = {"a": [("a", sweep_a(**kw))], "b": [("b", sweep_b(**kw))]}
    todo["both"] = todo["a"] + todo["b"]
    for tag, spec in todo[args.sweep]:
        t0 = time.perf_counter()
        rep = run_experiment(spec, progress=lambda j, si, di: print(".", end="", flush=True, file=sys.stderr))
        print(f"\nsweep {tag}: {len(rep.rows)} rows in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
        if tag == "a":
            delta = spec.steps[0]
            print(mae_table(rep, spec.noise_levels, lambda r, n, s: r.mae(n, "gfb", s, delta),
                            lambda s: f"s={s:g}"))
        else:
            sigma = spec.noise_levels[0]
            print(mae_table(rep, spec.steps, lambda r, n, d: r.mae(n, "gfb", sigma, d),
                            lambda d: f"pi/{math.pi / d:.0f}"))
        if args.out is not None:
            out = ensure_dir(args.out)
            rep.write_csv(out / f"sweep_{tag}.csv")
            (out / f"sweep_{tag}_aggregates.csv").write_bytes(rep.aggregates_csv().encode("utf-8"))


if __name__ == "__main__":
    main()
