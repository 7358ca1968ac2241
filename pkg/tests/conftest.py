import numpy as np
import pytest

from freediag import kernels
from freediag.algebra import AlgebraDescriptor
from freediag.models import DiagonalElement, ScalarAtomic, ScalarSemicircle, SemicircularProfile

BACKENDS = sorted(kernels.available_backends())


@pytest.fixture(params=["python", "cython"])
def backend(request, monkeypatch):
    """Run the test once per kernel backend."""
    mods = kernels.available_backends()
    if request.param not in mods:
        pytest.skip(f"{request.param} backend not built")
    monkeypatch.setattr(kernels, "_impl", mods[request.param])
    return request.param


@pytest.fixture
def half():
    return AlgebraDescriptor.uniform(2)


@pytest.fixture
def skew():
    return AlgebraDescriptor(2, (0.3, 0.7))


@pytest.fixture
def bernoulli():
    return ScalarAtomic([0.0, 1.0], [0.75, 0.25]), ScalarAtomic([0.0, 2.0], [0.75, 0.25])


@pytest.fixture
def semicircles():
    return ScalarSemicircle(1.0), ScalarSemicircle(1.0)


@pytest.fixture
def mixed(half):
    """Profile with a vanishing second row/column plus diag(0, 5)."""
    return SemicircularProfile(half, [[1, 0], [0, 0]]), DiagonalElement(half, [0, 5])
