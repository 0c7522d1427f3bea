import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kernelsvm.dataset import BinaryView

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parents[1]
ADULT = ROOT / "data" / "adult"


def make_view(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return BinaryView(X, y, np.arange(len(y)), 1, -1)


def blobs(n, d=2, sep=1.5, seed=0, noise=1.0):
    """Two Gaussian blobs with labels +1 / -1, balanced up to rounding."""
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    centre = np.zeros(d)
    centre[0] = sep / 2
    X = rng.normal(0.0, noise, (n, d)) + np.outer(y, centre)
    return X, y


def xor_data(n, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, 2))
    y = np.where(X[:, 0] * X[:, 1] > 0, 1.0, -1.0)
    return X, y


@pytest.fixture
def small_view():
    return make_view(*blobs(60, seed=3))
