"""Domain types, the wrap operator, fringe synthesis and phase reconstruction.

Fields are plain 2D ``float64`` numpy arrays. :func:`as_field` enforces the
shape and finiteness rules every operation relies on.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * np.pi
MIN_SIDE = 16
CONTRAST_FLOOR = 0.2
PHASE_KINDS = ("linear-ramp", "quadratic", "gaussian-mix")


def as_field(values, name: str = "field") -> np.ndarray:
    """Validate and return ``values`` as a 2D float64 array of at least 16x16 finite samples."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ConfigError(f"{name}: expected a 2D field, got shape {arr.shape}")
    if arr.shape[0] < MIN_SIDE or arr.shape[1] < MIN_SIDE:
        raise ConfigError(f"{name}: field must be at least {MIN_SIDE}x{MIN_SIDE}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name}: field contains non-finite samples")
    return arr


def same_shape(a: np.ndarray, b: np.ndarray, what: str = "fields") -> None:
    if a.shape != b.shape:
        raise ConfigError(f"dimension mismatch between {what}: {a.shape} vs {b.shape}")


def wrap(z):
    """Map angles into [-pi, pi) by adding an integer multiple of 2*pi.

    Works on scalars and arrays; non-finite input raises :class:`ConfigError`.
    """
    arr = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ConfigError("wrap: non-finite input")
    out = arr - TWO_PI * np.floor((arr + np.pi) / TWO_PI)
    # floor() can land exactly on +pi after rounding
    out = np.where(out >= np.pi, out - TWO_PI, out)
    out = np.where(out < -np.pi, out + TWO_PI, out)
    if np.ndim(z) == 0:
        return float(out)
    return out


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the stream identified by ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *keys: int) -> int:
    """A 64-bit child seed, reproducible from the parent seed and integer keys."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# generative model


@dataclass(frozen=True)
class FieldSpec:
    """Smooth low-order field: ``level + bump * gaussian(center, width)``.

    ``center`` is given as fractions of (width, height); ``width`` is the
    Gaussian sigma as a fraction of the shorter side.
    """

    level: float
    bump: float = 0.0
    center: tuple[float, float] = (0.5, 0.5)
    width: float = 0.3

    def render(self, height: int, width: int) -> np.ndarray:
        if self.bump == 0.0:
            return np.full((height, width), float(self.level))
        y, x = np.mgrid[0:height, 0:width].astype(np.float64)
        s = self.width * min(height, width)
        cx, cy = self.center[0] * width, self.center[1] * height
        g = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * s * s))
        return self.level + self.bump * g


@dataclass(frozen=True)
class PhaseSpec:
    """Shape of the test phase.

    linear-ramp
        ``2*pi*(cx*x/W + cy*y/H) + offset`` with ``cycles = (cx, cy)``.
    quadratic
        bowl ``2*pi*fringes*r**2/R**2 + offset``, ``R`` = half the shorter side,
        ``r`` measured from ``center`` (fractions of the field).
    gaussian-mix
        sum of Gaussian bumps ``(weight, cx, cy, sigma)`` (fractions of the
        field) rescaled to ``peak_to_valley`` radians, plus the ``cycles``
        carrier ramp.
    """

    kind: str = "linear-ramp"
    cycles: tuple[float, float] = (12.0, 0.0)
    fringes: float = 8.0
    center: tuple[float, float] = (0.5, 0.5)
    bumps: tuple[tuple[float, float, float, float], ...] = (
        (1.0, 0.3, 0.35, 0.15),
        (-0.7, 0.7, 0.6, 0.2),
        (0.5, 0.45, 0.8, 0.1),
    )
    peak_to_valley: float = 40.0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in PHASE_KINDS:
            raise ConfigError(f"unknown phase kind {self.kind!r}; expected one of {PHASE_KINDS}")

    def quadratic_alpha(self, height: int, width: int) -> float:
        """Curvature (rad / px^2) of the quadratic bowl."""
        r = min(height, width) / 2.0
        return TWO_PI * self.fringes / (r * r)

    def render(self, height: int, width: int) -> np.ndarray:
        y, x = np.mgrid[0:height, 0:width].astype(np.float64)
        ramp = TWO_PI * (self.cycles[0] * x / width + self.cycles[1] * y / height)
        if self.kind == "linear-ramp":
            return ramp + self.offset
        if self.kind == "quadratic":
            cx, cy = self.center[0] * width, self.center[1] * height
            alpha = self.quadratic_alpha(height, width)
            return alpha * ((x - cx) ** 2 + (y - cy) ** 2) + self.offset
        side = min(height, width)
        g = np.zeros((height, width))
        for weight, bx, by, bs in self.bumps:
            s = bs * side
            g += weight * np.exp(-((x - bx * width) ** 2 + (y - by * height) ** 2) / (2.0 * s * s))
        span = g.max() - g.min()
        if span > 0:
            g = (g - g.min()) / span
        return self.peak_to_valley * g + ramp + self.offset


@dataclass(frozen=True)
class FringeModel:
    """Parameters of the two-frame intensity model ``a_k + b_k cos(phi + d_k) + noise``."""

    phase: PhaseSpec = field(default_factory=PhaseSpec)
    background: tuple[FieldSpec, FieldSpec] = (FieldSpec(0.0), FieldSpec(0.0))
    contrast: tuple[FieldSpec, FieldSpec] = (FieldSpec(1.0), FieldSpec(1.0))
    delta: float = math.pi / 3
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.delta) and 0.0 < self.delta < math.pi):
            raise ConfigError(f"delta must lie in (0, pi), got {self.delta}")
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0.0):
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        for c in self.contrast:
            if c.level <= 0:
                raise ConfigError("contrast level must be positive")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FringeModel":
        d = dict(d)
        ph = dict(d.pop("phase", {}))
        for key in ("cycles", "center"):
            if key in ph:
                ph[key] = tuple(ph[key])
        if "bumps" in ph:
            ph["bumps"] = tuple(tuple(b) for b in ph["bumps"])

        def fields(items):
            out = []
            for f in items:
                f = dict(f)
                if "center" in f:
                    f["center"] = tuple(f["center"])
                out.append(FieldSpec(**f))
            return tuple(out)

        kwargs = {}
        if "background" in d:
            kwargs["background"] = fields(d.pop("background"))
        if "contrast" in d:
            kwargs["contrast"] = fields(d.pop("contrast"))
        try:
            return cls(phase=PhaseSpec(**ph), **kwargs, **d)
        except TypeError as exc:
            raise ConfigError(f"bad fringe model: {exc}") from exc


def random_model(
    rng: np.random.Generator,
    kind: str,
    delta: float,
    noise_sigma: float,
    seed: int,
) -> FringeModel:
    """Draw a model with variable background and contrast for the benchmark."""
    if kind == "linear-ramp":
        n = rng.uniform(9.0, 14.0)
        ang = rng.uniform(0.0, math.pi)
        phase = PhaseSpec(kind=kind, cycles=(n * math.cos(ang), n * math.sin(ang)),
                          offset=rng.uniform(-math.pi, math.pi))
    elif kind == "quadratic":
        phase = PhaseSpec(kind=kind, fringes=rng.uniform(8.0, 11.0),
                          center=(rng.uniform(0.35, 0.65), rng.uniform(0.35, 0.65)),
                          offset=rng.uniform(-math.pi, math.pi))
    elif kind == "gaussian-mix":
        bumps = tuple(
            (float(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.0)),
             rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.1, 0.2))
            for _ in range(3)
        )
        n = rng.uniform(7.0, 10.0)
        ang = rng.uniform(0.0, math.pi)
        phase = PhaseSpec(kind=kind, bumps=bumps, peak_to_valley=rng.uniform(20.0, 35.0),
                          cycles=(n * math.cos(ang), n * math.sin(ang)),
                          offset=rng.uniform(-math.pi, math.pi))
    else:
        raise ConfigError(f"unknown phase kind {kind!r}")
    background = tuple(FieldSpec(0.5, rng.uniform(0.0, 0.5)) for _ in range(2))
    contrast = tuple(FieldSpec(1.0, -rng.uniform(0.0, 0.6)) for _ in range(2))
    return FringeModel(phase=phase, background=background, contrast=contrast,
                       delta=delta, noise_sigma=noise_sigma, seed=seed)


# ---------------------------------------------------------------------------
# pairs


@dataclass(frozen=True)
class GroundTruth:
    phi: np.ndarray
    delta: float


@dataclass(frozen=True)
class FringePair:
    i1: np.ndarray
    i2: np.ndarray
    ground_truth: Optional[GroundTruth] = None

    def __post_init__(self):
        object.__setattr__(self, "i1", as_field(self.i1, "i1"))
        object.__setattr__(self, "i2", as_field(self.i2, "i2"))
        same_shape(self.i1, self.i2, "i1 and i2")


@dataclass(frozen=True)
class AnalyticMaps:
    """Per-pixel local phase (wrapped) and magnitude of each frame."""

    psi1: np.ndarray
    psi2: np.ndarray
    mag1: np.ndarray
    mag2: np.ndarray


@dataclass(frozen=True)
class NormalizedPair:
    """Two normalized frames, ``n1 ~ cos(phi)`` and ``n2 ~ cos(phi + delta)``.

    ``margin`` is the border width (pixels) that estimators leave out of their
    statistics; ``clamped`` counts samples that were clipped into range.
    """

    n1: np.ndarray
    n2: np.ndarray
    analytic: Optional[AnalyticMaps] = None
    margin: int = 0
    clamped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n1", as_field(self.n1, "n1"))
        object.__setattr__(self, "n2", as_field(self.n2, "n2"))
        same_shape(self.n1, self.n2, "n1 and n2")
        h, w = self.n1.shape
        if self.margin < 0 or 2 * self.margin >= min(h, w) - 2:
            raise ConfigError(f"margin {self.margin} too large for a {h}x{w} field")

    @property
    def shape(self) -> tuple[int, int]:
        return self.n1.shape

    def interior(self) -> tuple[slice, slice]:
        m = self.margin
        h, w = self.shape
        return slice(m, h - m), slice(m, w - m)

    def swapped(self) -> "NormalizedPair":
        a = self.analytic
        if a is not None:
            a = AnalyticMaps(a.psi2, a.psi1, a.mag2, a.mag1)
        return NormalizedPair(self.n2, self.n1, a, self.margin, self.clamped)


def synth_pair(model: FringeModel, height: int, width: int) -> FringePair:
    """Render both frames of ``model`` on a ``height x width`` grid."""
    if height < MIN_SIDE or width < MIN_SIDE:
        raise ConfigError(f"field must be at least {MIN_SIDE}x{MIN_SIDE}")
    phi = model.phase.render(height, width)
    frames = []
    for k, d in enumerate((0.0, model.delta)):
        a = model.background[k].render(height, width)
        b = np.maximum(model.contrast[k].render(height, width), CONTRAST_FLOOR)
        img = a + b * np.cos(phi + d)
        if model.noise_sigma > 0:
            img = img + model.noise_sigma * make_rng(model.seed, k).standard_normal((height, width))
        frames.append(img)
    return FringePair(frames[0], frames[1], GroundTruth(phi=phi, delta=float(model.delta)))


def exact_normalized(pair: FringePair) -> NormalizedPair:
    """Ideal normalization from the ground truth: ``cos(phi)``, ``cos(phi + delta)`` with exact phases."""
    gt = pair.ground_truth
    if gt is None:
        raise ConfigError("ideal normalization needs ground truth")
    p1 = wrap(gt.phi)
    p2 = wrap(gt.phi + gt.delta)
    ones = np.ones_like(p1)
    return NormalizedPair(np.cos(p1), np.cos(p2), AnalyticMaps(p1, p2, ones, ones))


# ---------------------------------------------------------------------------
# reconstruction


def _check_step(delta: float) -> float:
    delta = float(delta)
    if not (math.isfinite(delta) and 0.0 < delta < math.pi):
        raise ConfigError(f"delta must lie in (0, pi), got {delta}")
    return delta


def compute_phase(pair: NormalizedPair | Sequence[np.ndarray], delta: float) -> np.ndarray:
    """Wrapped phase of the first frame from two normalized frames and the step.

    ``phi = atan2(n1*cos(delta) - n2, n1*sin(delta))``
    """
    delta = _check_step(delta)
    if isinstance(pair, NormalizedPair):
        n1, n2 = pair.n1, pair.n2
    else:
        n1, n2 = (np.asarray(p, dtype=np.float64) for p in pair)
        same_shape(n1, n2, "normalized frames")
    return wrap(np.arctan2(n1 * math.cos(delta) - n2, n1 * math.sin(delta)))


def phase_error_map(estimated, truth) -> np.ndarray:
    """Wrapped per-pixel difference ``W(estimated - truth)``."""
    est = np.asarray(estimated, dtype=np.float64)
    ref = np.asarray(truth, dtype=np.float64)
    same_shape(est, ref, "phase maps")
    return wrap(est - ref)
