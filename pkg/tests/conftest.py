import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from twostep.core import FieldSpec, FringeModel, PhaseSpec, exact_normalized, synth_pair

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FLAT = (FieldSpec(0.0), FieldSpec(0.0))
UNIT = (FieldSpec(1.0), FieldSpec(1.0))

# 12 fringes with a one-cycle vertical tilt: an exactly horizontal ramp has no
# strict 3x3 extrema, which the extreme-value estimator needs.
E1_CYCLES = (12.0, 1.0)

# noiseless errors below this are rounding or filter-convergence floors
NUMERICAL_FLOOR = 1e-4


def ramp_model(delta, cycles=E1_CYCLES, sigma=0.0, seed=0, offset=0.0):
    return FringeModel(phase=PhaseSpec("linear-ramp", cycles=cycles, offset=offset),
                       background=FLAT, contrast=UNIT, delta=delta, noise_sigma=sigma, seed=seed)


def quadratic_model(delta, fringes=8.0, center=(0.47, 0.53), offset=0.2):
    return FringeModel(phase=PhaseSpec("quadratic", fringes=fringes, center=center, offset=offset),
                       background=FLAT, contrast=UNIT, delta=delta)


def exact_pair(model, size=512):
    return exact_normalized(synth_pair(model, size, size))


@pytest.fixture(scope="session")
def e1_pairs():
    """Exactly normalized 512x512 ramp pairs keyed by step."""
    steps = (math.pi / 10, math.pi / 6, math.pi / 4, math.pi / 3, math.pi / 2)
    return {d: exact_pair(ramp_model(d)) for d in steps}


@pytest.fixture(scope="session")
def e1(e1_pairs):
    return e1_pairs[math.pi / 3]


@pytest.fixture(scope="session")
def quad_pair():
    return exact_pair(quadratic_model(math.pi / 3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
