import math

import numpy as np
import pytest

SQ2 = 1 / math.sqrt(2)

# Canonical two-qubit witness, written out by hand.
W_CANON = 0.5 * np.array([[1, 0, 0, 0], [0, 0, -1, 0], [0, -1, 0, 0], [0, 0, 0, 1]], dtype=complex)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def brute_partial_transpose_a(m, na, nb):
    out = np.zeros_like(m)
    for i in range(na):
        for j in range(nb):
            for k in range(na):
                for l in range(nb):
                    out[k * nb + j, i * nb + l] = m[i * nb + j, k * nb + l]
    return out


def random_hermitian(d, rng):
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (x + x.conj().T) / 2


def random_density(d, rng):
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = x @ x.conj().T
    return rho / np.trace(rho)
