import itertools

import numpy as np
import pytest

from multiphoton.network import enumerate_outputs, mode_list


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def markov_distribution(u, n_occ):
    """Independent classical oracle: route every particle through |U|^2 by
    explicit enumeration of all M^N assignments; no permanents anywhere."""
    a = np.abs(np.asarray(u)) ** 2
    m = a.shape[0]
    ks = mode_list(n_occ)
    n = len(ks)
    probs = {tuple(m_occ): 0.0 for m_occ in enumerate_outputs(m, n)}
    for assignment in itertools.product(range(m), repeat=n):
        occ = [0] * m
        p = 1.0
        for k, dest in zip(ks, assignment):
            p *= a[k, dest]
            occ[dest] += 1
        probs[tuple(occ)] += p
    return probs
