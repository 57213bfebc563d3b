import numpy as np
import pytest

from embed_infolab.scaling_sim import DiscreteWorld


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


def random_unit_rows(rng, t, d):
    rows = rng.standard_normal((t, d))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def random_spd(rng, d, floor=0.1):
    m = rng.standard_normal((d, d))
    return m @ m.T / d + floor * np.eye(d)


def random_discrete_world(rng, ny=4, nx=6):
    p = rng.random((ny, nx)) + 0.02
    p /= p.sum(axis=1, keepdims=True)
    q = rng.random(ny) + 0.02
    q /= q.sum()
    return DiscreteWorld(px_given_y=p, py=q)
