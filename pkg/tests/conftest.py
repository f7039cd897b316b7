import functools

import numpy as np
import pytest

from hpme.geometry import compute_H, make_grid, model_from_name

CATALOG_CASES = [
    ("euclidean", {}),
    ("hyperbolic", {"c": 1.0}),
    ("quadratic", {"C0": 1.0}),
    ("power", {"k": 1.0, "sigma": 0.5}),
    ("power", {"k": 1.0, "sigma": 1.0}),
    ("superquadratic", {"p": 3.0}),
]


@functools.lru_cache(maxsize=None)
def _profile(name, params, N, R, h):
    model = model_from_name(name, **dict(params))
    return compute_H(model, N, make_grid(model, N, R, dr0=h, ratio=1.0, h_max=h))


def profile_for(name, N=3, R=20.0, h=0.05, **params):
    """Cached uniform-mesh profile; safe to share because profiles are immutable."""
    return _profile(name, tuple(sorted(params.items())), N, float(R), float(h))


@pytest.fixture(scope="session")
def hyp2():
    return profile_for("hyperbolic", N=2, R=44.5, c=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
