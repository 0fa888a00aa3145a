"""Fringe normalization: Gabor filter bank, a cheap baseline, and file ingestion.

Every normalizer returns a :class:`~twostep.core.NormalizedPair`. Only the
Gabor bank provides the analytic (local phase / magnitude) maps that the
IRE, MRE and RK estimators need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache, partial
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import fft as sfft
from scipy.ndimage import gaussian_filter

from .core import (
    AnalyticMaps,
    FringePair,
    NormalizedPair,
    as_field,
    exact_normalized,
    same_shape,
    wrap,
)
from .errors import ConfigError
from .imageio import read_pfm

CLAMP = 1.05
BORDER_MARGIN = 8


@dataclass(frozen=True)
class GfbConfig:
    orientations: int = 8
    periods: tuple[float, ...] = (20.0, 35.0, 45.0, 55.0)
    envelope_ratio: float = 0.4
    dc_removal_sigma: float = 32.0
    margin: int = BORDER_MARGIN

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(float(p) for p in self.periods))
        if self.orientations < 4:
            raise ConfigError("GFB needs at least 4 orientations")
        if not self.periods or min(self.periods) < 4:
            raise ConfigError("GFB periods must all be >= 4 pixels")
        if not 0.0 < self.envelope_ratio <= 1.0:
            raise ConfigError("envelope_ratio must lie in (0, 1]")
        if self.dc_removal_sigma <= 0:
            raise ConfigError("dc_removal_sigma must be positive")

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.orientations) * np.pi / self.orientations


@dataclass(frozen=True)
class GaborBank:
    """Frequency-domain analytic Gabor filters for one padded grid size."""

    config: GfbConfig
    shape: tuple[int, int]  # unpadded field shape
    pad: int
    padded: tuple[int, int]
    filters: np.ndarray = field(repr=False)  # (n_filters, Hp, Wp) float32, read-only

    def response(self, image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Max-magnitude complex response over the bank: returns ``(phase, magnitude)``."""
        h, w = self.shape
        p = self.pad
        hp, wp = self.padded
        # zero padding: mirrored fringes leak into the envelope near the border
        big = np.zeros((hp, wp))
        big[p:p + h, p:p + w] = image
        spec = sfft.fft2(big)
        best_mag = np.full((h, w), -1.0)
        best = np.zeros((h, w), dtype=np.complex128)
        for filt in self.filters:
            r = sfft.ifft2(spec * filt)[p:p + h, p:p + w]
            mag = np.abs(r)
            sel = mag > best_mag
            best_mag[sel] = mag[sel]
            best[sel] = r[sel]
        return wrap(np.angle(best)), best_mag


@lru_cache(maxsize=4)
def gabor_bank(shape: tuple[int, int], cfg: GfbConfig) -> GaborBank:
    """Build (or fetch from cache) the filter bank for a field of ``shape``."""
    h, w = shape
    tau_max = max(cfg.periods)
    if min(h, w) < 4 * tau_max:
        raise ConfigError(
            f"field {h}x{w} too small for GFB: need at least {int(math.ceil(4 * tau_max))} px per side"
        )
    pad = int(math.ceil(3 * cfg.envelope_ratio * tau_max))
    hp = sfft.next_fast_len(h + 2 * pad)
    wp = sfft.next_fast_len(w + 2 * pad)
    fy = sfft.fftfreq(hp)[:, None]
    fx = sfft.fftfreq(wp)[None, :]
    filters = []
    for tau in cfg.periods:
        sigma_f = 1.0 / (2.0 * np.pi * cfg.envelope_ratio * tau)
        for theta in cfg.thetas:
            ux, uy = math.cos(theta), math.sin(theta)
            g = np.exp(-((fx - ux / tau) ** 2 + (fy - uy / tau) ** 2) / (2.0 * sigma_f**2))
            # positive-frequency lobe only
            g *= (fx * ux + fy * uy) > 0
            filters.append(g.astype(np.float32))
    bank = np.stack(filters)
    bank.setflags(write=False)
    return GaborBank(cfg, (h, w), pad, (hp, wp), bank)


def remove_dc(image: np.ndarray, sigma: float) -> np.ndarray:
    return image - gaussian_filter(image, sigma, mode="reflect")


def gfb_normalize(pair: FringePair, cfg: GfbConfig = GfbConfig()) -> NormalizedPair:
    """Normalize both frames with a bank of oriented analytic Gabor filters.

    Each frame is DC-suppressed, filtered by every filter of the bank, and at
    each pixel the response with the largest magnitude is kept. The output
    frame is the cosine of that response's angle.
    """
    bank = gabor_bank(pair.i1.shape, cfg)
    psi1, mag1 = bank.response(remove_dc(pair.i1, cfg.dc_removal_sigma))
    psi2, mag2 = bank.response(remove_dc(pair.i2, cfg.dc_removal_sigma))
    return NormalizedPair(
        np.cos(psi1), np.cos(psi2), AnalyticMaps(psi1, psi2, mag1, mag2), margin=cfg.margin
    )


def baseline_normalize(
    pair: FringePair, bg_sigma: float = 32.0, env_sigma: float = 16.0, margin: int = BORDER_MARGIN
) -> NormalizedPair:
    """Background subtraction plus RMS envelope division.

    The envelope is ``sqrt(2 * G * d**2)`` so a pure cosine keeps unit amplitude.
    """
    if bg_sigma < 1 or env_sigma < 1:
        raise ConfigError("baseline sigmas must be >= 1 pixel")
    out = []
    clamped = 0
    for img in (pair.i1, pair.i2):
        d = remove_dc(img, bg_sigma)
        env = np.sqrt(2.0 * gaussian_filter(d * d, env_sigma, mode="reflect"))
        ok = env > 1e-6
        n = np.where(ok, d / np.where(ok, env, 1.0), 0.0)
        clamped += int(np.count_nonzero(np.abs(n) > CLAMP))
        out.append(np.clip(n, -CLAMP, CLAMP))
    return NormalizedPair(out[0], out[1], margin=margin, clamped=clamped)


def identity_normalize(pair: FringePair) -> NormalizedPair:
    """Pass frames through unchanged (clamped); for inputs that are already normalized."""
    clamped = int(np.count_nonzero(np.abs(pair.i1) > CLAMP) + np.count_nonzero(np.abs(pair.i2) > CLAMP))
    return NormalizedPair(np.clip(pair.i1, -CLAMP, CLAMP), np.clip(pair.i2, -CLAMP, CLAMP), clamped=clamped)


def ideal_normalize(pair: FringePair) -> NormalizedPair:
    """Oracle normalization from the pair's ground truth, with exact analytic maps."""
    return exact_normalized(pair)


def ingest_arrays(a1, a2, margin: int = BORDER_MARGIN) -> NormalizedPair:
    n1 = as_field(a1, "n1")
    n2 = as_field(a2, "n2")
    same_shape(n1, n2, "normalized frames")
    clamped = int(np.count_nonzero(np.abs(n1) > CLAMP) + np.count_nonzero(np.abs(n2) > CLAMP))
    return NormalizedPair(np.clip(n1, -CLAMP, CLAMP), np.clip(n2, -CLAMP, CLAMP),
                          margin=margin, clamped=clamped)


def ingest_normalized(path_1, path_2, margin: int = BORDER_MARGIN) -> NormalizedPair:
    """Load an externally normalized pair (e.g. HHT or DNN output) from two PFM files."""
    return ingest_arrays(read_pfm(path_1), read_pfm(path_2), margin=margin)


NORMALIZERS: dict[str, Callable[[FringePair], NormalizedPair]] = {
    "gfb": gfb_normalize,
    "baseline": baseline_normalize,
    "identity": identity_normalize,
    "ideal": ideal_normalize,
}

ANALYTIC_NORMALIZERS = frozenset({"gfb", "ideal"})


def get_normalizer(name: str) -> Callable[[FringePair], NormalizedPair]:
    try:
        return NORMALIZERS[name]
    except KeyError:
        raise ConfigError(f"unknown normalizer {name!r}; choose from {sorted(NORMALIZERS)}") from None


_PARAMETERS = {"baseline": frozenset({"bg_sigma", "env_sigma", "margin"})}


def make_normalizer(name: str, params: Optional[Mapping] = None) -> Callable[[FringePair], NormalizedPair]:
    """Normalizer ``name`` with keyword ``params`` bound (fields of :class:`GfbConfig` for ``gfb``)."""
    fn = get_normalizer(name)
    if not params:
        return fn
    params = dict(params)
    if name == "gfb":
        try:
            return partial(fn, cfg=GfbConfig(**params))
        except TypeError as exc:
            raise ConfigError(f"bad parameters for normalizer 'gfb': {exc}") from None
    allowed = _PARAMETERS.get(name, frozenset())
    unknown = set(params) - allowed
    if unknown:
        raise ConfigError(f"unknown parameters for normalizer {name!r}: {sorted(unknown)}")
    return partial(fn, **params)
