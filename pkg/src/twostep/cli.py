"""Command-line front end: ``twostep synth | normalize | estimate | phase | bench``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 degenerate input,
5 estimator failure. Errors are reported on stderr as a one-line JSON record
naming the error class.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from . import config as cfgmod
from .bench import error_map_experiment, pattern_model, run_experiment, timing_csv, timing_report
from .core import FringeModel, FringePair, as_field, compute_phase, same_shape, synth_pair
from .errors import CodecError, ConfigError, TwoStepError
from .estimators import ESTIMATORS, estimate
from .imageio import ensure_dir, read_pfm, write_pfm
from .normalize import NORMALIZERS, make_normalizer


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=True)


def _load_doc(args) -> dict:
    doc = cfgmod.load(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        doc["seed"] = args.seed
    if getattr(args, "size", None) is not None:
        doc["field_size"] = args.size
    cfgmod.validate(doc)
    return doc


def _read_pair(p1, p2) -> FringePair:
    i1, i2 = as_field(read_pfm(p1), str(p1)), as_field(read_pfm(p2), str(p2))
    same_shape(i1, i2, "input frames")
    return FringePair(i1, i2)


def _normalized(args, doc):
    pair = _read_pair(args.i1, args.i2)
    name = args.normalizer or doc["normalizer"]["name"]
    return make_normalizer(name, doc["normalizer"].get(name))(pair), name


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    doc = _load_doc(args)
    s = doc["synth"]
    for key in ("pattern", "delta", "noise_sigma"):
        if getattr(args, key, None) is not None:
            s[key] = getattr(args, key)
    cfgmod.validate(doc)
    if s["model"] is not None:
        model = FringeModel.from_dict(s["model"])
    else:
        model = pattern_model(doc["seed"], s["pattern"], s["delta"], s["noise_sigma"])
    size = doc["field_size"]
    pair = synth_pair(model, size, size)
    out = ensure_dir(args.out)
    write_pfm(out / "i1.pfm", pair.i1)
    write_pfm(out / "i2.pfm", pair.i2)
    write_pfm(out / "phi.pfm", pair.ground_truth.phi)
    meta = {"seed": doc["seed"], "pattern": s["pattern"], "delta": model.delta,
            "noise_sigma": model.noise_sigma, "field_size": size, "model": model.to_dict()}
    (out / "meta.json").write_text(_dump(meta) + "\n", encoding="utf-8")
    print(_dump({"out": str(out), "delta": model.delta}))
    return 0


def cmd_normalize(args) -> int:
    doc = _load_doc(args)
    pair, name = _normalized(args, doc)
    out = ensure_dir(args.out)
    write_pfm(out / "n1.pfm", pair.n1)
    write_pfm(out / "n2.pfm", pair.n2)
    if pair.analytic is not None:
        write_pfm(out / "psi1.pfm", pair.analytic.psi1)
        write_pfm(out / "psi2.pfm", pair.analytic.psi2)
    print(_dump({"out": str(out), "normalizer": name, "margin": pair.margin, "clamped": pair.clamped,
                 "analytic": pair.analytic is not None}))
    return 0


def cmd_estimate(args) -> int:
    doc = _load_doc(args)
    pair, name = _normalized(args, doc)
    est = estimate(args.estimator, pair, seed=args.seed if args.seed is not None else 0)
    record = {"estimator": args.estimator, "normalizer": name, "delta": est.delta,
              "diagnostics": est.diagnostics.to_dict()}
    if args.meta:
        try:
            meta = json.loads(Path(args.meta).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CodecError(f"cannot read {args.meta}: {exc}") from exc
        record["delta_true"] = meta["delta"]
        record["abs_error"] = abs(est.delta - meta["delta"])
    print(_dump(record))
    return 0


def cmd_phase(args) -> int:
    doc = _load_doc(args)
    if (args.delta is None) == (args.estimator is None):
        raise ConfigError("give exactly one of --delta or --estimator")
    pair, name = _normalized(args, doc)
    record = {"normalizer": name}
    if args.estimator is not None:
        est = estimate(args.estimator, pair, seed=args.seed if args.seed is not None else 0)
        delta = est.delta
        record["estimator"] = args.estimator
    else:
        delta = args.delta
    phi = compute_phase(pair, delta)
    out = Path(args.out)
    if out.parent != Path(""):
        ensure_dir(out.parent)
    write_pfm(out, phi)
    record.update(delta=delta, out=str(out))
    print(_dump(record))
    return 0


def cmd_bench(args) -> int:
    doc = _load_doc(args)
    if args.patterns is not None:
        doc["bench"]["pattern_count"] = args.patterns
    if args.record_time:
        doc["bench"]["record_time"] = True
    cfgmod.validate(doc)
    if args.print_defaults:
        print(json.dumps(doc, indent=2, sort_keys=True))
        return 0
    spec = cfgmod.experiment_spec(doc, args.sweep)
    out = ensure_dir(args.out)
    (out / "spec.json").write_text(_dump(spec.to_dict()) + "\n", encoding="utf-8")
    summary = {"out": str(out)}
    if not (args.maps or args.timing) or args.sweep:
        report = run_experiment(spec)
        (out / "report.csv").write_bytes(report.to_csv().encode("utf-8"))
        (out / "aggregates.csv").write_bytes(report.aggregates_csv().encode("utf-8"))
        summary.update(rows=len(report.rows), failed=len(report.failures()))
    if args.maps:
        maps = error_map_experiment(spec, out / "maps")
        summary["maps"] = len([m for m in maps if m.status == "ok"])
    if args.timing:
        rows = timing_report(spec)
        (out / "timing.csv").write_bytes(timing_csv(rows).encode("utf-8"))
        summary["timing_rows"] = len(rows)
    print(_dump(summary))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twostep", description="Two-step phase-shifting interferometry toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration layered over the defaults")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        return sp

    def frames(sp):
        sp.add_argument("i1", help="first frame (PFM)")
        sp.add_argument("i2", help="second frame (PFM)")
        # the ideal normalizer needs ground truth, which files do not carry
        sp.add_argument("--normalizer", choices=sorted(set(NORMALIZERS) - {"ideal"}))
        return sp

    sp = common(sub.add_parser("synth", help="synthesize a fringe pair with ground truth"))
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--pattern", type=int, help="catalog pattern index")
    sp.add_argument("--delta", type=float, help="phase step in radians, in (0, pi)")
    sp.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    sp.add_argument("--size", type=int, help="field side in pixels")
    sp.set_defaults(func=cmd_synth)

    sp = frames(common(sub.add_parser("normalize", help="normalize a pair of frames")))
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_normalize)

    sp = frames(common(sub.add_parser("estimate", help="estimate the phase step of a pair")))
    sp.add_argument("--estimator", required=True, choices=sorted(ESTIMATORS))
    sp.add_argument("--meta", help="meta.json from synth; adds the true step and absolute error")
    sp.set_defaults(func=cmd_estimate)

    sp = frames(common(sub.add_parser("phase", help="reconstruct the wrapped phase")))
    sp.add_argument("--delta", type=float, help="known phase step in radians")
    sp.add_argument("--estimator", choices=sorted(ESTIMATORS), help="estimate the step first")
    sp.add_argument("--out", required=True, help="output PFM path")
    sp.set_defaults(func=cmd_phase)

    sp = common(sub.add_parser("bench", help="run the evaluation protocol"))
    sp.add_argument("--out", default="bench_out", help="output directory")
    sp.add_argument("--sweep", choices=("a", "b"), help="a: noise sweep at pi/3; b: step sweep at sigma 0.5")
    sp.add_argument("--maps", action="store_true", help="write phase-error maps")
    sp.add_argument("--timing", action="store_true", help="write the timing table")
    sp.add_argument("--size", type=int, help="field side in pixels (1024 matches the original scale)")
    sp.add_argument("--patterns", type=int, help="number of patterns")
    sp.add_argument("--record-time", action="store_true",
                    help="fill the seconds column (the CSV is then no longer byte-reproducible)")
    sp.add_argument("--print-defaults", action="store_true", help="print the effective config and exit")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TwoStepError as exc:
        print(_dump({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
