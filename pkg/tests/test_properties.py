"""Randomized properties of the transforms and the subordination solver."""
import numpy as np
from hypothesis import given, settings, strategies as st

from freediag.algebra import AlgebraDescriptor, AlgebraElement
from freediag.models import (DiagonalElement, ScalarAtomic, SemicircularProfile, cauchy, dyson_solve,
                             h_transform)
from freediag.subordination import solve_subordination
from freediag.theorem import bv_scalar_oracle

HALF = AlgebraDescriptor.uniform(2)

reals = st.floats(-3, 3, allow_nan=False)
imags = st.floats(1e-2, 3, allow_nan=False)
points = st.tuples(reals, imags, reals, imags).map(
    lambda t: AlgebraElement(HALF, [complex(t[0], t[1]), complex(t[2], t[3])]))
profiles = st.lists(st.floats(0, 2, allow_nan=False), min_size=3, max_size=3).map(
    lambda v: np.array([[v[0], v[1]], [v[1], v[2]]]))


@st.composite
def atomic(draw):
    n = draw(st.integers(1, 4))
    locs = sorted(draw(st.sets(st.integers(-4, 4), min_size=n, max_size=n)))
    raw = np.array(draw(st.lists(st.floats(0.1, 1), min_size=len(locs), max_size=len(locs))))
    return ScalarAtomic([float(x) for x in locs], raw / raw.sum())


settings.register_profile("freediag", deadline=None, max_examples=60)
settings.load_profile("freediag")


@given(profiles, points)
def test_dyson_maps_to_lower_half_plane(S, b):
    g = dyson_solve(S, b).values
    assert np.all(g.imag < 0)
    assert np.max(np.abs(g - 1 / (b.values - S @ g))) <= 1e-9 * max(1, np.max(np.abs(g)))


@given(profiles, points)
def test_h_transform_nonnegative(S, b):
    assert np.all(h_transform(SemicircularProfile(HALF, S), b).values.imag >= -1e-10)


@given(profiles, profiles, points)
def test_subordination_half_plane_and_identity(S1, S2, b):
    r = solve_subordination(SemicircularProfile(HALF, S1), SemicircularProfile(HALF, S2), b)
    assert np.all(r.omega1.values.imag >= b.values.imag - 1e-10)
    assert np.all(r.omega2.values.imag >= b.values.imag - 1e-10)
    g = dyson_solve(S1 + S2, b).values
    assert np.max(np.abs(r.g_sum.values - g)) <= 1e-8 * max(1, np.max(np.abs(b.values)))


@given(st.tuples(reals, reals), profiles, points)
def test_diagonal_shift_exact(x, S, b):
    y = DiagonalElement(HALF, list(x))
    r = solve_subordination(SemicircularProfile(HALF, S), y, b)
    assert r.omega1.allclose(b - y.x, atol=1e-10)


@given(atomic(), atomic(), st.floats(-3, 3), st.floats(1e-2, 2))
def test_scalar_atomic_symmetry(x, y, a, eta):
    z = complex(a, eta)
    r, s = solve_subordination(x, y, z), solve_subordination(y, x, z)
    assert abs(r.g_sum.values[0] - s.g_sum.values[0]) <= 1e-8
    assert r.g_sum.values[0].imag < 0


@given(atomic(), atomic())
def test_bv_oracle_bounds(x, y):
    for s in x.locations:
        for t in y.locations:
            m = bv_scalar_oracle(x, y, s, t)
            mx = x.masses[list(x.locations).index(s)]
            my = y.masses[list(y.locations).index(t)]
            assert 0 <= m <= min(mx, my) + 1e-12
