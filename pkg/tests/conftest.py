import numpy as np
import pytest

from mfkernels import (
    DiscreteMeasure,
    DoubleSumKernel,
    GaussianKernel,
    MeanMap,
    PullbackKernel,
)


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)


@pytest.fixture
def gauss():
    return GaussianKernel(0.5)


@pytest.fixture
def double_sum(gauss):
    return DoubleSumKernel(gauss)


@pytest.fixture
def pullback(gauss):
    return PullbackKernel(gauss, MeanMap())


def random_measure(rng, max_atoms=6, d=1, lo=0.0, hi=1.0):
    n = int(rng.integers(1, max_atoms + 1))
    atoms = rng.uniform(lo, hi, size=(n, d))
    w = rng.uniform(0.1, 1.0, size=n)
    return DiscreteMeasure(atoms, w / w.sum())
