import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_sphere_points(rng, n, dim=4):
    q = rng.standard_normal((n, dim))
    if dim < 4:
        q = np.hstack([q, np.zeros((n, 4 - dim))])
    return q / np.linalg.norm(q, axis=1)[:, None]


def random_spherical(rng, n, margin=0.3):
    phi = rng.uniform(0, 2 * np.pi, n)
    theta = rng.uniform(margin, np.pi - margin, n)
    return phi, theta
