import json

import numpy as np
import pytest

from freediag.algebra import AlgebraDescriptor, AlgebraElement, invert, sup_norm
from freediag.errors import DimensionMismatch, InvalidModel, NotInHalfPlane, NotPositive, NotSelfadjoint
from freediag.models import (DiagonalElement, ScalarAtomic, ScalarSemicircle, SemicircularProfile,
                             cauchy, check_compatible, congruence_shift, dyson_solve, load_model,
                             model_from_dict, norm_bound, save_model, semicircle_cauchy)

GOLDEN = (1 - np.sqrt(5)) / 2   # Im of G_semicircle(i) for unit variance


def all_models(d2):
    return [
        DiagonalElement(d2, [0, 1]),
        SemicircularProfile(d2, [[1, 0.5], [0.5, 2]], [0.3, -1]),
        SemicircularProfile(d2, [[1, 0], [0, 0]]),
        ScalarAtomic([0, 1, 3], [0.5, 0.25, 0.25]),
        ScalarSemicircle(2.0),
    ]


class TestCauchy:
    def test_diagonal(self, half):
        g = cauchy(DiagonalElement(half, [0, 1]), half.scalar(1j)).g
        assert g.allclose(AlgebraElement(half, [-1j, -0.5 - 0.5j]), atol=1e-15)

    def test_semicircle_at_i(self):
        g = cauchy(ScalarSemicircle(1.0), 1j).g.values[0]
        assert g == pytest.approx(1j * GOLDEN, abs=1e-14)

    def test_profile_reduces_to_semicircle(self):
        d1 = AlgebraDescriptor(1, (1.0,))
        g = cauchy(SemicircularProfile(d1, [[1.0]]), 1j).g.values[0]
        assert g == pytest.approx(1j * GOLDEN, abs=1e-12)

    def test_atomic(self):
        m = ScalarAtomic([0, 2], [0.5, 0.5])
        z = 1 + 1j
        assert cauchy(m, z).g.values[0] == pytest.approx(0.5 / z + 0.5 / (z - 2), abs=1e-15)

    def test_rejects_lower_half_plane(self, half):
        with pytest.raises(NotInHalfPlane):
            cauchy(DiagonalElement(half, [0, 1]), half.scalar(1.0))

    def test_semicircle_stable_near_axis(self):
        # just outside the support Im G is tiny but must stay accurate
        z = 2.5 + 1e-12j
        g = semicircle_cauchy(z, 1.0)
        exact_re = (2.5 - np.sqrt(2.5 ** 2 - 4)) / 2
        assert g.real == pytest.approx(exact_re, rel=1e-13)
        # dG/dz = -G^2/(1-G^2) gives Im G ~ y * G'(2.5)
        dg = -exact_re ** 2 / (1 - exact_re ** 2)
        assert g.imag == pytest.approx(1e-12 * dg, rel=1e-6)

    def test_half_plane_mapping(self, half):
        rng = np.random.default_rng(0)
        for m in all_models(half):
            for _ in range(20):
                b = rng.uniform(-4, 4, m.dim) + 1j * 10 ** rng.uniform(-6, 1, m.dim)
                assert np.all(cauchy(m, b).g.values.imag < 0)

    def test_first_moment(self, half):
        for m in all_models(half):
            y = 1e6
            g = cauchy(m, m.descriptor.scalar(1j * y)).g.values
            assert np.allclose(1j * y * g, 1.0, atol=1e-4)

    def test_neighbourhood_of_infinity(self, half):
        for m in all_models(half):
            nb = norm_bound(m)
            for r in (3 * nb + 1, 10 * nb + 1):
                b = m.descriptor.scalar(1j * r)
                g = cauchy(m, b).g
                q = sup_norm(invert(b)) * nb
                assert sup_norm(b * g - 1) <= q / (1 - q) + 1e-12


class TestDyson:
    def test_zero_profile(self, half):
        b0 = AlgebraElement(half, [1 + 2j, -3 + 0.5j])
        assert dyson_solve(np.zeros((2, 2)), b0) == invert(b0)

    def test_decoupled_coordinate(self, half):
        g = dyson_solve([[1, 0], [0, 0]], half.scalar(1j)).values
        assert g[0] == pytest.approx(1j * GOLDEN, abs=1e-12)
        assert g[1] == pytest.approx(-1j, abs=1e-15)

    def test_scalar_quadratic(self):
        d1 = AlgebraDescriptor(1, (1.0,))
        g = dyson_solve([[1.0]], AlgebraElement(d1, [2j])).values[0]
        assert g == pytest.approx(1j * (2 - np.sqrt(8)) / 2, abs=1e-12)

    def test_fixed_point_reverified(self, half):
        S = np.array([[1, 0.5], [0.5, 2]])
        b0 = AlgebraElement(half, [0.3 + 0.01j, -1 + 0.02j])
        g = dyson_solve(S, b0, tol=1e-13).values
        assert np.max(np.abs(g - 1 / (b0.values - S @ g))) <= 1e-11
        assert np.all(g.imag < 0)

    def test_start_independence(self, half):
        S = np.array([[1, 0.5], [0.5, 2]])
        b0 = AlgebraElement(half, [0.3 + 0.05j, -1 + 0.05j])
        tol = 1e-12
        g1 = dyson_solve(S, b0, tol=tol, g0=invert(b0).values).values
        g2 = dyson_solve(S, b0, tol=tol, g0=-1j * np.ones(2)).values
        assert np.max(np.abs(g1 - g2)) <= 10 * tol * max(1, np.max(np.abs(g1)))

    def test_rejects_negative_kernel(self, half):
        with pytest.raises(InvalidModel):
            dyson_solve([[1, -0.1], [0, 1]], half.scalar(1j))


class TestNormBound:
    def test_examples(self, half):
        assert norm_bound(DiagonalElement(half, [-3, 2])) == 3
        assert norm_bound(ScalarSemicircle(1.0)) == 2
        assert norm_bound(ScalarAtomic([0, 1], [0.5, 0.5])) == 1

    def test_profile(self, half):
        m = SemicircularProfile(half, [[1, 3], [0, 4]], [1, -2])
        assert norm_bound(m) == pytest.approx(2 + 2 * 2)


class TestCongruenceShift:
    def test_identity(self, half):
        m = SemicircularProfile(half, [[1, 0.5], [0.5, 2]], [0.3, -1])
        t = congruence_shift(m, half.unit(), half.zero())
        assert np.array_equal(t.S, m.S) and np.array_equal(t.shift, m.shift)

    def test_diagonal_compression(self, half):
        t = congruence_shift(DiagonalElement(half, [1, 2]), [1, 0], [0, 0])
        assert isinstance(t, DiagonalElement) and t.x.tolist() == [1, 0]

    def test_scaling_c4(self):
        d1 = AlgebraDescriptor(1, (1.0,))
        t = congruence_shift(SemicircularProfile(d1, [[1.0]]), [2.0], [0.0])
        assert t.S.tolist() == [[16.0]]

    def test_profile_formula(self, half):
        m = SemicircularProfile(half, [[1, 2], [3, 4]], [1, -1])
        t = congruence_shift(m, [2, 0.5], [1, 1])
        c2 = np.array([4, 0.25])
        assert np.allclose(t.S, c2[:, None] * m.S * c2[None, :])
        assert np.allclose(t.shift, c2 * m.shift - 1)

    def test_scalar_models(self):
        t = congruence_shift(ScalarSemicircle(2.0), [1.5], [0.5])
        assert isinstance(t, SemicircularProfile)
        assert t.S[0, 0] == pytest.approx(1.5 ** 4 * 2) and t.shift[0] == -0.5
        a = congruence_shift(ScalarAtomic([0, 1], [0.5, 0.5]), [2.0], [1.0])
        assert a.locations.tolist() == [-1, 3]
        z = congruence_shift(ScalarAtomic([0, 1], [0.5, 0.5]), [0.0], [0.25])
        assert isinstance(z, DiagonalElement) and z.x.tolist() == [-0.25]

    def test_errors(self, half):
        m = DiagonalElement(half, [1, 2])
        with pytest.raises(NotPositive):
            congruence_shift(m, [-1, 1], [0, 0])
        with pytest.raises(NotSelfadjoint):
            congruence_shift(m, [1, 1], [1j, 0])


class TestValidation:
    def test_atomic_invariants(self):
        with pytest.raises(InvalidModel):
            ScalarAtomic([0, 1], [0.5, 0.6])
        with pytest.raises(InvalidModel):
            ScalarAtomic([1, 0], [0.5, 0.5])
        with pytest.raises(InvalidModel):
            ScalarAtomic([0, 1], [1.0, 0.0])

    def test_scalar_models_need_dim_one(self, half):
        with pytest.raises(InvalidModel):
            ScalarAtomic([0], [1.0], half)
        with pytest.raises(InvalidModel):
            ScalarSemicircle(1.0, half)
        with pytest.raises(InvalidModel):
            ScalarSemicircle(-1.0)

    def test_profile_shape(self, half):
        with pytest.raises(InvalidModel):
            SemicircularProfile(half, [[1.0]])
        with pytest.raises(InvalidModel):
            DiagonalElement(half, [1, 2, 3])

    def test_compatibility(self, half, skew):
        with pytest.raises(DimensionMismatch, match="1 and 2"):
            check_compatible(ScalarSemicircle(1.0), DiagonalElement(half, [0, 0]))
        with pytest.raises(DimensionMismatch):
            check_compatible(DiagonalElement(skew, [0, 0]), DiagonalElement(half, [0, 0]))


class TestFiles:
    def test_roundtrip(self, half, tmp_path):
        for m in all_models(half):
            p = tmp_path / "m.json"
            save_model(m, p)
            back = load_model(p)
            assert type(back) is type(m)
            assert back.to_dict() == m.to_dict()

    def test_documented_fields(self):
        doc = {"dim": 2, "weights": [0.5, 0.5], "type": "semicircular_profile",
               "S": [[1, 0], [0, 0]], "shift": [0, 5]}
        m = model_from_dict(doc)
        assert m.shift.tolist() == [0, 5]
        a = model_from_dict({"dim": 1, "weights": [1], "type": "scalar_atomic",
                             "atoms": [[0, 0.75], [1, 0.25]]})
        assert a.masses.tolist() == [0.75, 0.25]

    @pytest.mark.parametrize("doc", [
        {"dim": 1, "weights": [1], "type": "gaussian"},
        {"dim": 1, "weights": [1], "type": "diagonal"},
        {"dim": 2, "weights": [0.5, 0.6], "type": "diagonal", "x": [0, 1]},
        {"dim": 1, "weights": [1], "type": "scalar_atomic", "atoms": "abc"},
        {"weights": [1], "type": "diagonal", "x": [0]},
    ])
    def test_bad_documents(self, doc):
        with pytest.raises(InvalidModel):
            model_from_dict(doc)

    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(InvalidModel):
            load_model(p)
        p.write_text(json.dumps([1, 2]))
        with pytest.raises(InvalidModel):
            load_model(p)
