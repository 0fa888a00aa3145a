"""Two-step phase-step estimators.

Each estimator maps a :class:`~twostep.core.NormalizedPair` to a
:class:`StepEstimate` with ``delta`` in ``(0, pi)``. Pixel statistics use the
pair's interior only (the normalizer's flagged border is skipped).

Estimator ids: kreis, psc, gs, evi, rp, ire, mre, qpp, tse, ddv, gpsi, slef,
plus the five-term ellipse fit ``lef`` (not part of the standard twelve).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import fft as sfft
from scipy.ndimage import gaussian_filter, maximum_filter, minimum_filter, uniform_filter

from .core import NormalizedPair, make_rng, wrap
from .errors import ConfigError, DegenerateInputError, EstimatorFailure, IncompatibleError

DEGENERATE_EPS = 1e-6
DEGENERATE_FLAG = 0.05


@dataclass
class Diagnostics:
    iterations: int = 0
    samples_used: int = 0
    root_candidates: list[float] = field(default_factory=list)
    window_origin: Optional[tuple[int, int]] = None
    coefficients: list[float] = field(default_factory=list)
    clamped: int = 0
    degenerate: bool = False

    def to_dict(self) -> dict:
        d = {"iterations": self.iterations, "samples_used": self.samples_used,
             "clamped": self.clamped, "degenerate": self.degenerate}
        if self.root_candidates:
            d["root_candidates"] = [float(r) for r in self.root_candidates]
        if self.window_origin is not None:
            d["window_origin"] = [int(v) for v in self.window_origin]
        if self.coefficients:
            d["coefficients"] = [float(c) for c in self.coefficients]
        return d


@dataclass
class StepEstimate:
    method: str
    delta: float
    step_map: Optional[np.ndarray] = None
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    def to_dict(self) -> dict:
        return {"method": self.method, "delta": float(self.delta),
                "diagnostics": self.diagnostics.to_dict()}


@dataclass(frozen=True)
class IreConfig:
    kappa: float = math.pi / 10
    max_iterations: int = 100
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.kappa <= 0 or self.tolerance <= 0 or self.max_iterations < 1:
            raise ConfigError("IreConfig needs kappa > 0, tolerance > 0, max_iterations >= 1")


def _finish(method: str, delta: float, diag: Diagnostics, step_map=None) -> StepEstimate:
    delta = float(delta)
    if not math.isfinite(delta):
        raise EstimatorFailure(f"{method}: non-finite step")
    if delta <= DEGENERATE_EPS or delta >= math.pi - DEGENERATE_EPS:
        raise DegenerateInputError(f"{method}: degenerate step {delta:.3g} rad (frames in phase or anti-phase)")
    diag.degenerate = delta < DEGENERATE_FLAG
    return StepEstimate(method, delta, step_map, diag)


def _clip(x, diag: Diagnostics, lo: float = -1.0, hi: float = 1.0):
    arr = np.asarray(x)
    diag.clamped += int(np.count_nonzero((arr < lo) | (arr > hi)))
    out = np.clip(arr, lo, hi)
    return float(out) if np.ndim(x) == 0 else out


def _interior(pair: NormalizedPair) -> tuple[np.ndarray, np.ndarray]:
    s = pair.interior()
    return pair.n1[s], pair.n2[s]


def _analytic(pair: NormalizedPair, method: str):
    if pair.analytic is None:
        raise IncompatibleError(f"{method} needs analytic phase maps (use the gfb normalizer)")
    return pair.analytic


# ---------------------------------------------------------------------------
# Fourier / correlation family


def estimate_kreis(pair: NormalizedPair, lowcut_radius: float = 3.0) -> StepEstimate:
    """Quadrature (half-spectrum) filtering, then the angle between the complex fields.

    The kept half-plane is the one holding the strongest non-DC peak of the
    first frame. The per-pixel step is folded to ``[0, pi]`` before averaging,
    so sign flips of closed fringes do not cancel.
    """
    h, w = pair.shape
    f1 = sfft.fft2(pair.n1)
    f2 = sfft.fft2(pair.n2)
    ky = sfft.fftfreq(h)[:, None]
    kx = sfft.fftfreq(w)[None, :]
    dc = np.hypot(kx * w, ky * h) <= lowcut_radius
    mag = np.where(dc, 0.0, np.abs(f1))
    peak = np.unravel_index(np.argmax(mag), mag.shape)
    energy = math.sqrt(float(np.sum(np.abs(f1) ** 2)))
    if mag[peak] <= 1e-9 * max(energy, 1e-300):
        raise DegenerateInputError("kreis: no spectral peak outside the DC disk")
    px, py = kx[0, peak[1]], ky[peak[0], 0]
    keep = ((kx * px + ky * py) > 0) & ~dc
    c1 = sfft.ifft2(f1 * keep)
    c2 = sfft.ifft2(f2 * keep)
    num = c1.real * c2.imag - c1.imag * c2.real
    den = c1.real * c2.real + c1.imag * c2.imag
    s = pair.interior()
    dmap = np.abs(np.arctan2(num, den))[s]
    return _finish("kreis", float(np.mean(dmap)), Diagnostics(samples_used=dmap.size), dmap)


def estimate_psc(pair: NormalizedPair) -> StepEstimate:
    """Arccos of the Pearson correlation between the frames."""
    a, b = (x.ravel() for x in _interior(pair))
    a = a - a.mean()
    b = b - b.mean()
    sa, sb = math.sqrt(float(np.mean(a * a))), math.sqrt(float(np.mean(b * b)))
    if sa < 1e-12 or sb < 1e-12:
        raise DegenerateInputError("psc: a frame has zero variance")
    diag = Diagnostics(samples_used=a.size)
    rho = _clip(float(np.mean(a * b)) / (sa * sb), diag)
    return _finish("psc", math.acos(rho), diag)


def estimate_gs(pair: NormalizedPair) -> StepEstimate:
    """Gram-Schmidt orthonormalization followed by the arcsin ratio estimate.

    The ratio's denominator uses the raw first frame; pixels where it falls
    below 1e-6 in magnitude are skipped.
    """
    i1, i2 = (x.ravel() for x in _interior(pair))
    n1 = np.linalg.norm(i1)
    if n1 < 1e-12:
        raise DegenerateInputError("gs: first frame is zero")
    u1 = i1 / n1
    resid = i2 - np.dot(i2, u1) * u1
    nr = np.linalg.norm(resid)
    if nr < 1e-9 * max(np.linalg.norm(i2), 1.0):
        raise DegenerateInputError("gs: second frame is parallel to the first (zero step)")
    u2 = resid / nr
    den = i1 * u2
    ok = np.abs(den) >= 1e-6
    if not np.any(ok):
        raise DegenerateInputError("gs: no pixel with a usable denominator")
    ratio = (u1[ok] * resid[ok]) / den[ok]
    diag = Diagnostics(samples_used=int(ok.sum()))
    s = _clip(float(np.mean(ratio)), diag)
    return _finish("gs", math.asin(s), diag)


def _extrema(img: np.ndarray, sl: tuple[slice, slice], guard: float):
    """Strict 3x3 maxima >= guard and minima <= -guard inside ``sl`` (at least 1 px from the edge)."""
    ring = np.ones((3, 3), dtype=bool)
    ring[1, 1] = False
    nbmax = maximum_filter(img, footprint=ring, mode="nearest")
    nbmin = minimum_filter(img, footprint=ring, mode="nearest")
    mask = np.zeros(img.shape, dtype=bool)
    mask[sl] = True
    mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = False
    peaks = mask & (img > nbmax) & (img >= guard)
    troughs = mask & (img < nbmin) & (img <= -guard)
    return peaks, troughs


def estimate_evi(pair: NormalizedPair, extremum_guard: float = 0.95) -> StepEstimate:
    """Arccos of the frame ratio, averaged over the extrema of the first frame."""
    peaks, troughs = _extrema(pair.n1, pair.interior(), extremum_guard)
    sel = peaks | troughs
    if not np.any(sel):
        raise DegenerateInputError("evi: no qualifying extrema in the first frame")
    diag = Diagnostics(samples_used=int(sel.sum()))
    vals = np.arccos(_clip(pair.n2[sel] / pair.n1[sel], diag))
    return _finish("evi", float(vals.mean()), diag)


def estimate_rp(pair: NormalizedPair, n_samples: int = 10000, seed: int = 0) -> StepEstimate:
    """Least-squares cosine of the step from random pixel pairs.

    For normalized frames ``sum(a*b) / sum(a*a)`` equals ``cos(delta)``, so the
    step is its arccos.
    """
    i1, i2 = (x.ravel() for x in _interior(pair))
    prod = i1 * i2
    energy = i1 * i1 + i2 * i2
    rng = make_rng(seed, 0x5250)
    got_a, got_b = [], []
    accepted = attempts = 0
    limit = 50 * n_samples
    while accepted < n_samples and attempts < limit:
        m = min(n_samples, limit - attempts)
        p = rng.integers(0, i1.size, m)
        q = rng.integers(0, i1.size, m)
        attempts += m
        a = 2.0 * (prod[p] - prod[q])
        ok = np.abs(a) > 1e-9
        got_a.append(a[ok])
        got_b.append(energy[p][ok] - energy[q][ok])
        accepted += int(ok.sum())
    if accepted < 100:
        raise DegenerateInputError(f"rp: only {accepted} usable pixel pairs")
    a = np.concatenate(got_a)[:n_samples]
    b = np.concatenate(got_b)[:n_samples]
    diag = Diagnostics(samples_used=a.size, iterations=attempts)
    r = _clip(float(np.dot(a, b) / np.dot(a, a)), diag)
    return _finish("rp", math.acos(r), diag)


# ---------------------------------------------------------------------------
# local-phase (analytic) family


def phase_difference_map(pair: NormalizedPair) -> np.ndarray:
    """``|W(psi2 - psi1)|`` over the interior."""
    an = _analytic(pair, "phase difference")
    s = pair.interior()
    return np.abs(wrap(an.psi2[s] - an.psi1[s]))


def ire_weights(residual, kappa: float):
    """Robust weights ``kappa**2 / (kappa + r**2)**2``; equal to 1 at zero residual."""
    r2 = np.asarray(residual) ** 2
    return kappa * kappa / (kappa + r2) ** 2


def estimate_ire(pair: NormalizedPair, cfg: IreConfig = IreConfig()) -> StepEstimate:
    """Iteratively reweighted mean of the local phase difference map."""
    _analytic(pair, "ire")
    dmap = phase_difference_map(pair)
    d = dmap.ravel()
    delta = float(d.mean())  # unit weights on the first pass
    it = 1
    while it < cfg.max_iterations:
        wgt = ire_weights(d - delta, cfg.kappa)
        new = float(np.dot(wgt, d) / wgt.sum())
        it += 1
        done = abs(new - delta) < cfg.tolerance
        delta = new
        if done:
            break
    return _finish("ire", delta, Diagnostics(iterations=it, samples_used=d.size), dmap)


def estimate_mre(pair: NormalizedPair) -> StepEstimate:
    """Median of the local phase difference map."""
    _analytic(pair, "mre")
    dmap = phase_difference_map(pair)
    return _finish("mre", float(np.median(dmap)), Diagnostics(samples_used=dmap.size), dmap)


def rk_step_map(pair: NormalizedPair) -> np.ndarray:
    """Kreis' angle formula fed with the local phases (full field).

    Evaluated with the two-argument arctangent and folded to ``[0, pi]``;
    this coincides with ``|W(psi2 - psi1)|``.
    """
    an = _analytic(pair, "rk")
    c1, s1 = np.cos(an.psi1), np.sin(an.psi1)
    c2, s2 = np.cos(an.psi2), np.sin(an.psi2)
    return np.abs(np.arctan2(c1 * s2 - s1 * c2, c1 * c2 + s1 * s2))


# ---------------------------------------------------------------------------
# closed-form estimators


def estimate_tse(pair: NormalizedPair, gauss_sigma: float = 8.0) -> StepEstimate:
    """Arccos of Gaussian-smoothed ``2*n1*n2`` over smoothed ``n1**2 + n2**2``."""
    num = gaussian_filter(2.0 * pair.n1 * pair.n2, gauss_sigma, mode="reflect")
    den = gaussian_filter(pair.n1 ** 2 + pair.n2 ** 2, gauss_sigma, mode="reflect")
    s = pair.interior()
    num, den = num[s], den[s]
    if np.min(den) < 1e-6:
        raise DegenerateInputError("tse: smoothed energy vanishes inside the field")
    diag = Diagnostics(samples_used=den.size)
    dmap = np.arccos(_clip(num / den, diag))
    return _finish("tse", float(dmap.mean()), diag, dmap)


def estimate_ddv(pair: NormalizedPair) -> StepEstimate:
    """Diamond diagonals: ``2*atan(|i1 - i2| / |i1 + i2|)`` on zero-mean frames."""
    i1, i2 = _interior(pair)
    i1 = i1 - i1.mean()
    i2 = i2 - i2.mean()
    plus = np.linalg.norm(i1 + i2)
    minus = np.linalg.norm(i1 - i2)
    if plus < 1e-9:
        raise DegenerateInputError("ddv: frames are in anti-phase")
    return _finish("ddv", 2.0 * math.atan(minus / plus), Diagnostics(samples_used=i1.size))


def estimate_gpsi(pair: NormalizedPair) -> StepEstimate:
    """Root of ``x**2 + B*x + C`` built from frame averages; step is its arccos.

    The root of larger magnitude is kept; the other tracks the fringe average
    of ``cos(2*phi + delta)`` and sits near zero.
    """
    i1, i2 = _interior(pair)
    b = float(np.mean(-2.0 * i1 * i2))
    c = float(np.mean(i1 * i1 + i2 * i2 - 1.0))
    disc = b * b - 4.0 * c
    if disc < -1e-9:
        raise DegenerateInputError(f"gpsi: negative discriminant {disc:.3g}")
    sq = math.sqrt(max(disc, 0.0))
    roots = [(-b + sq) / 2.0, (-b - sq) / 2.0]
    diag = Diagnostics(root_candidates=roots, samples_used=i1.size)
    usable = [r for r in roots if abs(r) <= 1.05]
    if not usable:
        raise DegenerateInputError("gpsi: no root within [-1.05, 1.05]")
    pick = _clip(max(usable, key=abs), diag)
    return _finish("gpsi", math.acos(pick), diag)


def _ellipse_step(t1: float, t2: float, method: str) -> float:
    if not (t1 > 0 and t2 > 0):
        raise DegenerateInputError(f"{method}: ellipse coefficients not positive ({t1:.3g}, {t2:.3g})")
    return 2.0 * math.atan(math.sqrt(t1 / t2))


def estimate_slef(pair: NormalizedPair, robust: bool = True, kappa: float = 0.5,
                  max_iterations: int = 20) -> StepEstimate:
    """Two-term Lissajous ellipse ``t1*x**2 + t2*y**2 = 1`` with ``x = n1 + n2``, ``y = n1 - n2``."""
    i1, i2 = (v.ravel() for v in _interior(pair))
    x2 = (i1 + i2) ** 2
    y2 = (i1 - i2) ** 2
    design = np.column_stack([x2, y2])
    wgt = np.ones(x2.size)
    theta = np.zeros(2)
    it = 0
    for it in range(1, (max_iterations if robust else 1) + 1):
        sw = np.sqrt(wgt)
        sol, _, rank, _ = np.linalg.lstsq(design * sw[:, None], sw, rcond=None)
        if rank < 2:
            raise DegenerateInputError("slef: ellipse fit is rank deficient")
        converged = np.allclose(sol, theta, rtol=1e-12, atol=1e-14)
        theta = sol
        if converged:
            break
        wgt = ire_weights(design @ theta - 1.0, kappa)
    diag = Diagnostics(iterations=it, samples_used=x2.size, coefficients=list(theta))
    return _finish("slef", _ellipse_step(theta[0], theta[1], "slef"), diag)


def estimate_lef_full(pair: NormalizedPair) -> StepEstimate:
    """Five-term conic fit with the constant fixed at -1, for imperfectly normalized frames."""
    i1, i2 = (v.ravel() for v in _interior(pair))
    x = i1 + i2
    y = i1 - i2
    design = np.column_stack([x * x, y * y, x, y])
    theta, _, rank, _ = np.linalg.lstsq(design, np.ones(x.size), rcond=None)
    if rank < 4:
        raise DegenerateInputError("lef: conic fit is rank deficient")
    diag = Diagnostics(samples_used=x.size, coefficients=[*theta, -1.0])
    if theta[0] * theta[1] <= 0:
        raise DegenerateInputError("lef: coefficient ratio is not positive")
    return _finish("lef", 2.0 * math.atan(math.sqrt(theta[0] / theta[1])), diag)


# ---------------------------------------------------------------------------
# quadratic phase parameters via an extended Kalman filter


def _dominant_frequency(w1: np.ndarray, w2: np.ndarray) -> tuple[float, float]:
    """Angular frequency (rad/px, x then y) of the window's strongest tone.

    Of the two conjugate peaks, the one where the second frame leads the
    first is returned, so the step comes out positive.
    """
    f1 = sfft.fft2(w1 - w1.mean())
    f2 = sfft.fft2(w2 - w2.mean())
    h, w = w1.shape
    mag = np.abs(f1)
    mag[0, 0] = 0.0
    iy, ix = np.unravel_index(np.argmax(mag), mag.shape)
    fy = sfft.fftfreq(h)[iy]
    fx = sfft.fftfreq(w)[ix]
    if np.angle(f2[iy, ix] * np.conj(f1[iy, ix])) < 0:
        fx, fy = -fx, -fy
    return 2 * math.pi * fx, 2 * math.pi * fy


def estimate_qpp(pair: NormalizedPair, window: int = 64, seed: int = 0,
                 sweeps: int = 2, extremum_guard: float = 0.95) -> StepEstimate:
    """Quadratic phase model fitted in a window by an extended Kalman filter.

    State ``c0..c6``: ``phi1 = c0 + c1 x + c2 y + c3 x^2 + c4 x y + c5 y^2`` and
    ``phi2`` the same with ``c6`` for the constant; the step is ``c6 - c0``.
    The window starts at a randomly chosen local maximum of the first frame,
    which makes ``c0 = 0`` a good starting value. Coordinates are pixels
    relative to that maximum.
    """
    h, w = pair.shape
    m = pair.margin
    if window > min(h, w) - 2 * m:
        raise DegenerateInputError(f"qpp: window {window} does not fit the interior")
    peaks, _ = _extrema(pair.n1, pair.interior(), extremum_guard)
    ys, xs = np.nonzero(peaks)
    if ys.size == 0:
        raise DegenerateInputError("qpp: no local maximum to anchor the window")
    k = int(make_rng(seed, 0x515050).integers(0, ys.size))
    ay, ax = int(ys[k]), int(xs[k])
    y0 = min(max(ay, m), h - m - window)
    x0 = min(max(ax, m), w - m - window)
    w1 = pair.n1[y0:y0 + window, x0:x0 + window]
    w2 = pair.n2[y0:y0 + window, x0:x0 + window]

    c1, c2 = _dominant_frequency(w1, w2)
    state = np.array([0.0, c1, c2, 0.0, 0.0, 0.0, 1.0])
    cov = np.diag([math.pi ** 2, 1.0, 1.0, 0.1, 0.1, 0.1, math.pi ** 2])
    q = 1e-8 * np.eye(7)
    rvar = [max(float(np.var(win - uniform_filter(win, 3, mode="nearest"))), 1e-2) for win in (w1, w2)]
    rmat = np.diag(rvar)

    yy, xx = np.mgrid[y0:y0 + window, x0:x0 + window]
    xr = (xx - ax).ravel().astype(float)
    yr = (yy - ay).ravel().astype(float)
    basis = np.column_stack([xr, yr, xr * xr, xr * yr, yr * yr])
    z1 = w1.ravel()
    z2 = w2.ravel()
    eye = np.eye(7)
    hmat = np.zeros((2, 7))
    steps = 0
    for _ in range(sweeps):
        for j in range(z1.size):
            cov = cov + q
            g = basis[j]
            shared = float(state[1:6] @ g)
            p1 = state[0] + shared
            p2 = state[6] + shared
            s1, s2 = math.sin(p1), math.sin(p2)
            hmat[0, 0] = -s1
            hmat[0, 1:6] = -s1 * g
            hmat[1, 1:6] = -s2 * g
            hmat[1, 6] = -s2
            innov = np.array([z1[j] - math.cos(p1), z2[j] - math.cos(p2)])
            ph = cov @ hmat.T
            gain = ph @ np.linalg.inv(hmat @ ph + rmat)
            state = state + gain @ innov
            ikh = eye - gain @ hmat
            cov = ikh @ cov @ ikh.T + gain @ rmat @ gain.T
            steps += 1
        if not np.all(np.isfinite(cov)) or np.max(np.abs(cov)) > 1e6:
            raise EstimatorFailure("qpp: Kalman filter diverged")
    diag = Diagnostics(iterations=steps, samples_used=z1.size, window_origin=(y0, x0),
                       coefficients=list(state))
    return _finish("qpp", abs(wrap(state[6] - state[0])), diag)


# ---------------------------------------------------------------------------
# registry

ESTIMATORS: dict[str, Callable[..., StepEstimate]] = {
    "kreis": estimate_kreis,
    "psc": estimate_psc,
    "gs": estimate_gs,
    "evi": estimate_evi,
    "rp": estimate_rp,
    "ire": estimate_ire,
    "mre": estimate_mre,
    "qpp": estimate_qpp,
    "tse": estimate_tse,
    "ddv": estimate_ddv,
    "gpsi": estimate_gpsi,
    "slef": estimate_slef,
    "lef": estimate_lef_full,
}

STANDARD_TWELVE = ("kreis", "psc", "gs", "evi", "rp", "ire", "qpp", "tse", "ddv", "gpsi", "slef", "mre")
ANALYTIC_ESTIMATORS = frozenset({"ire", "mre"})
SEEDED_ESTIMATORS = frozenset({"rp", "qpp"})


def estimate(name: str, pair: NormalizedPair, seed: int = 0, **kwargs) -> StepEstimate:
    """Dispatch by estimator id; ``seed`` is forwarded to the randomized methods."""
    try:
        fn = ESTIMATORS[name]
    except KeyError:
        raise ConfigError(f"unknown estimator {name!r}; choose from {sorted(ESTIMATORS)}") from None
    if name in SEEDED_ESTIMATORS:
        kwargs.setdefault("seed", seed)
    return fn(pair, **kwargs)
