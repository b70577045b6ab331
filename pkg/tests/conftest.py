import numpy as np
import pytest

from polyprec import DenseOperator


def random_rotation(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_spd(rng, n, lam_low=0.2, lam_high=8.0, spectrum=None):
    if spectrum is None:
        spectrum = np.sort(rng.uniform(lam_low, lam_high, n))[::-1]
    q = random_rotation(rng, n)
    return DenseOperator(q @ np.diag(spectrum) @ q.T)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
