import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "photonpos",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("photonpos")


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


def spherical_frame(k, chart):
    """Frames written in spherical angles; an independent route to the closed forms."""
    k = np.asarray(k, dtype=float)
    r = np.linalg.norm(k)
    th = np.arccos(k[2] / r)
    ph = np.arctan2(k[1], k[0])
    theta_hat = np.array([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)])
    phi_hat = np.array([-np.sin(ph), np.cos(ph), 0.0])
    if chart == "south":
        e1 = np.cos(ph) * theta_hat + np.sin(ph) * phi_hat
        e2 = -np.sin(ph) * theta_hat + np.cos(ph) * phi_hat
    else:
        e1 = np.cos(ph) * theta_hat - np.sin(ph) * phi_hat
        e2 = np.sin(ph) * theta_hat + np.cos(ph) * phi_hat
    return np.stack([e1, e2, k / r], axis=1)
