"""Evaluation protocol: noise sweep, step sweep, phase-error maps, timing.

Every cell is rebuilt from ``(master_seed, pattern, sigma index, step index)``
alone, so any row of a report can be regenerated in isolation.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np

from .core import (
    FringeModel,
    FringePair,
    NormalizedPair,
    compute_phase,
    derive_seed,
    make_rng,
    phase_error_map,
    random_model,
    synth_pair,
    wrap,
)
from .errors import ConfigError, IncompatibleError, TwoStepError
from .estimators import ANALYTIC_ESTIMATORS, ESTIMATORS, STANDARD_TWELVE, estimate
from .imageio import ensure_dir, write_pfm, write_pgm
from .normalize import ANALYTIC_NORMALIZERS, get_normalizer, make_normalizer

CSV_HEADER = ("estimator", "normalizer", "pattern", "sigma", "delta_true", "delta_est",
              "abs_error", "seconds", "status")
PATTERN_KINDS = ("linear-ramp", "quadratic", "gaussian-mix")
PAPER_NOISE = (0.0, 0.25, 0.5, 0.75, 1.0)
PAPER_STEPS = (math.pi / 10, math.pi / 6, math.pi / 4, math.pi / 3, math.pi / 2)


@dataclass(frozen=True)
class ExperimentSpec:
    pattern_count: int = 10
    noise_levels: tuple[float, ...] = PAPER_NOISE
    steps: tuple[float, ...] = (math.pi / 3,)
    normalizers: tuple[str, ...] = ("gfb",)
    estimators: tuple[str, ...] = STANDARD_TWELVE
    field_size: int = 512
    master_seed: int = 2020
    pairs: Optional[tuple[tuple[str, str], ...]] = None  # explicit (estimator, normalizer) list
    record_time: bool = False
    rp_samples: int = 10000
    qpp_window: int = 64
    normalizer_params: Mapping[str, Mapping] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("noise_levels", "steps", "normalizers", "estimators"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.pairs is not None:
            object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        if self.pattern_count < 1:
            raise ConfigError("pattern_count must be >= 1")
        if self.field_size < 16:
            raise ConfigError("field_size must be >= 16")
        if any(not (0.0 < d < math.pi) for d in self.steps):
            raise ConfigError("every step must lie in (0, pi)")
        if any(not (s >= 0.0) for s in self.noise_levels):
            raise ConfigError("noise levels must be >= 0")
        for n in self.normalizers:
            get_normalizer(n)
        for n, params in self.normalizer_params.items():
            make_normalizer(n, params)
        for e in self.estimators:
            if e not in ESTIMATORS:
                raise ConfigError(f"unknown estimator {e!r}")
        for e, n in self.pairs or ():
            if e not in ESTIMATORS:
                raise ConfigError(f"unknown estimator {e!r}")
            get_normalizer(n)
            if e in ANALYTIC_ESTIMATORS and n not in ANALYTIC_NORMALIZERS:
                raise IncompatibleError(f"{e} needs analytic maps; normalizer {n!r} provides none")

    def combinations(self) -> list[tuple[str, str]]:
        """(estimator, normalizer) pairs to run; analytic estimators only meet analytic normalizers."""
        if self.pairs is not None:
            return list(self.pairs)
        return [(e, n) for n in self.normalizers for e in self.estimators
                if e not in ANALYTIC_ESTIMATORS or n in ANALYTIC_NORMALIZERS]

    def normalizer(self, name: str):
        return make_normalizer(name, self.normalizer_params.get(name))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["normalizer_params"] = {k: dict(v) for k, v in self.normalizer_params.items()}
        return d


def sweep_a(**overrides) -> ExperimentSpec:
    """Noise sweep at a fixed step of pi/3."""
    return ExperimentSpec(**{"noise_levels": PAPER_NOISE, "steps": (math.pi / 3,), **overrides})


def sweep_b(**overrides) -> ExperimentSpec:
    """Step sweep at a fixed noise level of 0.5."""
    return ExperimentSpec(**{"noise_levels": (0.5,), "steps": PAPER_STEPS, **overrides})


# ---------------------------------------------------------------------------
# pattern catalog


def pattern_model(master_seed: int, pattern: int, delta: float, sigma: float,
                  sigma_index: int = 0, step_index: int = 0) -> FringeModel:
    """Model for one cell. The shape depends on ``pattern`` only; the noise stream
    on the full cell index."""
    kind = PATTERN_KINDS[pattern % len(PATTERN_KINDS)]
    shape_rng = make_rng(master_seed, 1, pattern)
    noise_seed = derive_seed(master_seed, 2, pattern, sigma_index, step_index)
    return random_model(shape_rng, kind, delta, sigma, noise_seed)


def cell_pair(spec: ExperimentSpec, pattern: int, sigma_index: int, step_index: int) -> FringePair:
    model = pattern_model(spec.master_seed, pattern, spec.steps[step_index],
                          spec.noise_levels[sigma_index], sigma_index, step_index)
    return synth_pair(model, spec.field_size, spec.field_size)


# ---------------------------------------------------------------------------
# reports


@dataclass
class Row:
    estimator: str
    normalizer: str
    pattern: int
    sigma: float
    delta_true: float
    delta_est: float
    abs_error: float
    seconds: float
    status: str

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def key(self):
        return (self.estimator, self.normalizer, self.sigma, self.delta_true, self.pattern)


@dataclass
class CellSummary:
    estimator: str
    normalizer: str
    sigma: float
    delta_true: float
    n_ok: int
    n_failed: int
    mae: float
    q1: float
    median: float
    q3: float
    min: float
    max: float


@dataclass
class BenchReport:
    rows: list[Row] = field(default_factory=list)

    def sorted(self) -> "BenchReport":
        return BenchReport(sorted(self.rows, key=Row.key))

    def aggregates(self) -> list[CellSummary]:
        cells: dict[tuple, list[Row]] = {}
        for r in self.rows:
            cells.setdefault((r.estimator, r.normalizer, r.sigma, r.delta_true), []).append(r)
        out = []
        for key in sorted(cells):
            rows = cells[key]
            errs = np.array([r.abs_error for r in rows if r.ok])
            failed = sum(not r.ok for r in rows)
            if errs.size:
                q1, med, q3 = np.percentile(errs, [25, 50, 75])
                stats = (float(np.mean(errs)), float(q1), float(med), float(q3),
                         float(errs.min()), float(errs.max()))
            else:
                stats = (math.nan,) * 6
            out.append(CellSummary(*key, int(errs.size), failed, *stats))
        return out

    def mae(self, estimator: str, normalizer: str, sigma: float, delta: float) -> float:
        errs = [r.abs_error for r in self.rows if r.ok and r.estimator == estimator
                and r.normalizer == normalizer and r.sigma == sigma and r.delta_true == delta]
        return float(np.mean(errs)) if errs else math.nan

    def failures(self, estimator: Optional[str] = None) -> list[Row]:
        return [r for r in self.rows if not r.ok and (estimator is None or r.estimator == estimator)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(CSV_HEADER)
        for r in self.sorted().rows:
            w.writerow([r.estimator, r.normalizer, r.pattern, _num(r.sigma), _num(r.delta_true),
                        _num(r.delta_est), _num(r.abs_error), _num(r.seconds), r.status])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_bytes(self.to_csv().encode("utf-8"))

    def aggregates_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        names = list(CellSummary.__dataclass_fields__)
        w.writerow(names)
        for c in self.aggregates():
            w.writerow([_num(v) if isinstance(v, float) else v for v in asdict(c).values()])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "BenchReport":
        reader = csv.reader(io.StringIO(text))
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ConfigError(f"unexpected CSV header {header}")
        rows = []
        for rec in reader:
            e, n, p, s, dt, de, ae, sec, st = rec
            rows.append(Row(e, n, int(p), float(s), float(dt), _parse(de), _parse(ae), _parse(sec), st))
        return cls(rows)


def _num(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def _parse(s: str) -> float:
    return math.nan if s == "" else float(s)


def _estimate_row(name: str, norm_name: str, pair: NormalizedPair, pattern: int, sigma: float,
                  delta: float, seed: int, spec: ExperimentSpec) -> Row:
    kwargs = {}
    if name == "rp":
        kwargs["n_samples"] = spec.rp_samples
    elif name == "qpp":
        kwargs["window"] = spec.qpp_window
    t0 = time.perf_counter()
    try:
        est = estimate(name, pair, seed=seed, **kwargs)
        value, status = est.delta, "ok"
    except TwoStepError as exc:
        value, status = math.nan, type(exc).__name__
    dt = time.perf_counter() - t0 if spec.record_time else math.nan
    err = abs(value - delta) if status == "ok" else math.nan
    return Row(name, norm_name, pattern, float(sigma), float(delta), value, err, dt, status)


def run_cell(spec: ExperimentSpec, pattern: int, sigma_index: int, step_index: int) -> list[Row]:
    """All (estimator, normalizer) rows for one synthesized pair."""
    pair = cell_pair(spec, pattern, sigma_index, step_index)
    sigma = spec.noise_levels[sigma_index]
    delta = spec.steps[step_index]
    seed = derive_seed(spec.master_seed, 3, pattern, sigma_index, step_index)
    combos = spec.combinations()
    rows = []
    for norm_name in dict.fromkeys(n for _, n in combos):
        normalized = spec.normalizer(norm_name)(pair)
        for est_name in (e for e, n in combos if n == norm_name):
            rows.append(_estimate_row(est_name, norm_name, normalized, pattern, sigma, delta, seed, spec))
    return rows


def run_experiment(spec: ExperimentSpec, progress=None) -> BenchReport:
    """Run every (pattern, sigma, step, normalizer, estimator) cell of ``spec``."""
    rows: list[Row] = []
    for si in range(len(spec.noise_levels)):
        for di in range(len(spec.steps)):
            for j in range(spec.pattern_count):
                rows.extend(run_cell(spec, j, si, di))
                if progress is not None:
                    progress(j, si, di)
    return BenchReport(rows).sorted()


# ---------------------------------------------------------------------------
# brute-force oracle


def reconstruction_residual(n1: np.ndarray, n2: np.ndarray, delta: float) -> float:
    """``sum((n2 - cos(phi(delta) + delta))**2)`` with ``phi`` from :func:`compute_phase`."""
    phi = compute_phase((n1, n2), delta)
    return float(np.sum((n2 - np.cos(phi + delta)) ** 2))


def oracle_step(pair: NormalizedPair, grid_step: float = 1e-4, grid_pixels: int = 64,
                rounds: int = 3) -> float:
    """Step minimizing the reconstruction residual, by grid search plus golden-section refinement.

    The grid pass scores a strided ``grid_pixels x grid_pixels`` lattice of the
    interior; refinement uses every interior pixel.
    """
    s = pair.interior()
    n1, n2 = pair.n1[s], pair.n2[s]
    sy = max(1, n1.shape[0] // grid_pixels)
    sx = max(1, n1.shape[1] // grid_pixels)
    c1, c2 = n1[::sy, ::sx], n2[::sy, ::sx]
    lo, hi = 0.01, math.pi - 0.01
    grid = np.arange(lo, hi + 0.5 * grid_step, grid_step)
    grid = grid[grid <= hi]
    scores = np.array([reconstruction_residual(c1, c2, d) for d in grid])
    best = float(grid[int(np.argmin(scores))])

    def f(d):
        return reconstruction_residual(n1, n2, d)

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    half = grid_step
    for _ in range(rounds):
        a, b = max(lo, best - half), min(hi, best + half)
        x1 = b - invphi * (b - a)
        x2 = a + invphi * (b - a)
        f1, f2 = f(x1), f(x2)
        while b - a > 1e-10:
            if f1 <= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - invphi * (b - a)
                f1 = f(x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + invphi * (b - a)
                f2 = f(x2)
        cand = 0.5 * (a + b)
        if f(cand) <= f(best):
            best = cand
        half *= 0.5
    return best


# ---------------------------------------------------------------------------
# phase-error maps


PREVIEW_RANGE = (-math.pi / 2, math.pi / 2)


def reconstruction_error(pair: NormalizedPair, delta: float, truth_phi: np.ndarray) -> np.ndarray:
    """Wrapped error of the reconstructed phase against the true phase."""
    return phase_error_map(compute_phase(pair, delta), wrap(truth_phi))


@dataclass
class ErrorMapResult:
    estimator: str
    normalizer: str
    delta_est: float
    rms: float
    pfm: Optional[Path]
    pgm: Optional[Path]
    status: str = "ok"


def error_map_experiment(spec: ExperimentSpec, out_dir, pattern: int = 0,
                         sigma: float = 0.5, delta: float = math.pi / 3) -> list[ErrorMapResult]:
    """Write wrapped phase-error maps (PFM + 8-bit PGM preview) per (estimator, normalizer)."""
    out = ensure_dir(out_dir)
    model = pattern_model(spec.master_seed, pattern, delta, sigma)
    pair = synth_pair(model, spec.field_size, spec.field_size)
    seed = derive_seed(spec.master_seed, 3, pattern, 0, 0)
    results = []
    combos = spec.combinations()
    for norm_name in dict.fromkeys(n for _, n in combos):
        normalized = spec.normalizer(norm_name)(pair)
        for est_name in (e for e, n in combos if n == norm_name):
            stem = f"errmap_{est_name}_{norm_name}"
            try:
                est = estimate(est_name, normalized, seed=seed)
            except TwoStepError as exc:
                results.append(ErrorMapResult(est_name, norm_name, math.nan, math.nan, None, None,
                                              type(exc).__name__))
                continue
            err = reconstruction_error(normalized, est.delta, pair.ground_truth.phi)
            pfm, pgm = out / f"{stem}.pfm", out / f"{stem}.pgm"
            write_pfm(pfm, err)
            write_pgm(pgm, err, *PREVIEW_RANGE)
            s = normalized.interior()
            results.append(ErrorMapResult(est_name, norm_name, est.delta,
                                          float(np.sqrt(np.mean(err[s] ** 2))), pfm, pgm))
    return results


def dominant_frequency(field2d: np.ndarray) -> tuple[int, int]:
    """Signed (ky, kx) FFT bin of the strongest non-DC component (mean removed)."""
    spec = np.abs(np.fft.fft2(field2d - field2d.mean()))
    spec[0, 0] = 0.0
    iy, ix = np.unravel_index(np.argmax(spec), spec.shape)
    h, w = field2d.shape
    ky = iy - h if iy > h // 2 else iy
    kx = ix - w if ix > w // 2 else ix
    return int(ky), int(kx)


# ---------------------------------------------------------------------------
# timing


@dataclass
class TimingRow:
    kind: str  # "normalizer" or "estimator"
    name: str
    normalizer: str
    seconds: float  # median over repeats


def _median_time(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def timing_report(spec: ExperimentSpec, repeats: int = 5, sigma: float = 0.5) -> list[TimingRow]:
    """Median wall time per normalizer and per estimator on one pair of ``spec.field_size``."""
    pair = synth_pair(pattern_model(spec.master_seed, 0, spec.steps[0], sigma), spec.field_size,
                      spec.field_size)
    rows = []
    normalized = {}
    for n in spec.normalizers:
        fn = spec.normalizer(n)
        rows.append(TimingRow("normalizer", n, n, _median_time(lambda: fn(pair), repeats)))
        normalized[n] = fn(pair)
    for e, n in spec.combinations():
        def run():
            try:
                estimate(e, normalized[n])
            except TwoStepError:
                pass
        rows.append(TimingRow("estimator", e, n, _median_time(run, repeats)))
    return rows


def timing_csv(rows: Iterable[TimingRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(("kind", "name", "normalizer", "seconds"))
    for r in rows:
        w.writerow((r.kind, r.name, r.normalizer, repr(r.seconds)))
    return buf.getvalue()
