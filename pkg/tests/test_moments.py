from functools import lru_cache

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsecd.christoffel import assemble
from sparsecd.errors import InvalidArgumentError, NumericOverflowError
from sparsecd.moments import (
    AffineMap,
    CoupledChainMeasure,
    ParabolicInterval,
    ProductMeasure,
    SampleSet,
    UniformInterval,
    analytic_moments,
    empirical_moments,
    get_measure,
    quadrature_moments,
    read_samples,
    restrict,
    uniform_box,
    write_samples,
)

X1, X2, X3 = sp.symbols("x1 x2 x3")
COUPLED_DENSITY = (1 + X1 * X2) * (1 + X2 * X3) / 8


@lru_cache(maxsize=None)
def coupled_symbolic(a, b, c):
    expr = COUPLED_DENSITY * X1**a * X2**b * X3**c
    for x in (X1, X2, X3):
        expr = sp.integrate(expr, (x, -1, 1))
    return sp.Rational(expr)


class TestSymbolicOracle:
    def test_mixed_pair_moment(self):
        m = analytic_moments(CoupledChainMeasure(), (1, 2), 2)
        assert m[(1, 1)] == pytest.approx(1 / 9, abs=1e-15)
        assert coupled_symbolic(1, 1, 0) == sp.Rational(1, 9)

    def test_second_moment(self):
        m = analytic_moments(CoupledChainMeasure(), (1,), 2)
        assert m[(2,)] == pytest.approx(1 / 3, abs=1e-15)

    def test_table_matches_sympy(self):
        m = analytic_moments(CoupledChainMeasure(), (1, 2, 3), 3)
        for a in range(4):
            for b in range(4):
                for c in range(4):
                    assert m[(a, b, c)] == pytest.approx(float(coupled_symbolic(a, b, c)), abs=1e-14)

    def test_total_mass(self):
        assert coupled_symbolic(0, 0, 0) == 1


class TestRestrict:
    @pytest.mark.parametrize("sub", [(1,), (2,), (3,), (1, 2), (2, 3), (1, 3), (3, 1)])
    def test_matches_direct_marginal(self, sub):
        mu = CoupledChainMeasure()
        full = analytic_moments(mu, (1, 2, 3), 4)
        np.testing.assert_allclose(restrict(full, sub).entries, mu.moment_table(sub, 4).entries, atol=1e-15)

    def test_lower_degree(self):
        full = analytic_moments(uniform_box(2), (1, 2), 4)
        sub = restrict(full, (2,), 2)
        assert sub.degree == 2
        np.testing.assert_allclose(sub.entries, [1, 0, 1 / 3])

    def test_rejects_unknown_var(self):
        with pytest.raises(InvalidArgumentError):
            restrict(analytic_moments(uniform_box(2), (1, 2), 2), (3,))

    def test_empirical_restriction_commutes(self, rng):
        s = SampleSet(rng.normal(size=(500, 3)))
        full = empirical_moments(s, (1, 2, 3), 3)
        np.testing.assert_allclose(restrict(full, (3, 1)).entries, empirical_moments(s, (3, 1), 3).entries, atol=1e-12)


class TestQuadrature:
    def test_coupled(self):
        mu = CoupledChainMeasure()
        quad = quadrature_moments(mu.density, mu.box, (1, 2, 3), 4)
        np.testing.assert_allclose(quad.entries, analytic_moments(mu, (1, 2, 3), 4).entries, atol=1e-10)

    def test_product_marginal(self):
        mu = ProductMeasure([UniformInterval(0, 2), ParabolicInterval(-1, 1)])
        quad = quadrature_moments(mu.density, mu.box, (2,), 6)
        np.testing.assert_allclose(quad.entries, mu.moment_table((2,), 6).entries, atol=1e-10)


class TestUnivariate:
    def test_uniform_moments(self):
        np.testing.assert_allclose(UniformInterval().moments(4), [1, 0, 1 / 3, 0, 1 / 5])

    def test_parabolic_moments(self):
        np.testing.assert_allclose(ParabolicInterval().moments(4), [1, 0, 1 / 5, 0, 3 / 35])

    def test_shifted_uniform(self):
        np.testing.assert_allclose(UniformInterval(0, 2).moments(2), [1, 1, 4 / 3])

    @pytest.mark.parametrize("cls", [UniformInterval, ParabolicInterval])
    def test_sampler_moments(self, cls):
        u = cls(-0.5, 1.5)
        x = u.sample(np.random.default_rng(3), 200_000)
        m = u.moments(3)
        for k in range(1, 4):
            se = np.std(x**k) / np.sqrt(x.size)
            assert abs(np.mean(x**k) - m[k]) < 4 * se


class TestEmpirical:
    def test_small_sample(self):
        s = SampleSet(np.array([[1.0, 2.0], [-1.0, 0.0]]))
        m = empirical_moments(s, (1, 2), 2)
        assert m[(0, 0)] == 1.0
        assert m[(1, 1)] == pytest.approx(1.0)
        assert m[(0, 2)] == pytest.approx(2.0)

    def test_converges_to_analytic(self):
        mu = CoupledChainMeasure()
        exact = analytic_moments(mu, (1, 2, 3), 4).entries
        emp = empirical_moments(mu.sample(100_000, seed=11), (1, 2, 3), 4).entries
        assert np.max(np.abs(emp - exact)) < 0.02

    def test_within_three_standard_errors(self):
        mu = CoupledChainMeasure()
        s = mu.sample(100_000, seed=5)
        exact = analytic_moments(mu, (1, 2, 3), 2)
        bad = 0
        for alpha in np.ndindex(3, 3, 3):
            vals = np.prod(s.points ** np.array(alpha), axis=1)
            se = vals.std() / np.sqrt(vals.size)
            bad += abs(vals.mean() - exact[alpha]) > 3 * max(se, 1e-12)
        # 27 entries, a 3-sigma excursion is rare
        assert bad <= 1

    def test_overflow(self):
        s = SampleSet(np.array([[1e200], [2e200]]))
        with pytest.raises(NumericOverflowError):
            empirical_moments(s, (1,), 4)

    def test_rejects_nonfinite_samples(self):
        with pytest.raises(InvalidArgumentError):
            SampleSet(np.array([[np.nan, 1.0]]))

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(5, 60), degree=st.integers(1, 3), seed=st.integers(0, 10_000))
    def test_moment_matrix_is_psd(self, n, degree, seed):
        s = SampleSet(np.random.default_rng(seed).uniform(-1, 1, size=(n, 2)))
        M = assemble(empirical_moments(s, (1, 2), 2 * degree), degree, "coord").matrix
        assert np.allclose(M, M.T)
        assert np.linalg.eigvalsh(M)[0] >= -1e-10 * np.abs(M).max()


class TestSamplesIO:
    def test_round_trip(self, tmp_path, rng):
        pts = rng.normal(size=(7, 3))
        path = tmp_path / "s.csv"
        write_samples(path, pts)
        np.testing.assert_array_equal(read_samples(path).points, pts)

    def test_dimension_check(self, tmp_path):
        path = tmp_path / "s.csv"
        write_samples(path, np.zeros((3, 2)))
        with pytest.raises(InvalidArgumentError):
            read_samples(path, dim=3)


class TestAffine:
    def test_to_unit_box(self, rng):
        s = SampleSet(rng.uniform(3, 7, size=(100, 2)))
        A = AffineMap.to_unit_box(s)
        y = A.apply(s.points)
        np.testing.assert_allclose(y.min(axis=0), -1)
        np.testing.assert_allclose(y.max(axis=0), 1)

    def test_log_jacobian(self):
        A = AffineMap(np.zeros(2), np.array([2.0, 4.0]))
        assert A.log_jacobian() == pytest.approx(np.log(8.0))


class TestMeasureIds:
    def test_uniform(self):
        assert get_measure("uniform:3").dim == 3

    def test_product(self):
        mu = get_measure("product:uniform,parabolic(0,2)")
        assert mu.dim == 2
        assert mu.moment_table((2,), 1)[(1,)] == pytest.approx(1.0)

    @pytest.mark.parametrize("bad", ["uniform:x", "gauss:2", "product:weird"])
    def test_unknown(self, bad):
        with pytest.raises(InvalidArgumentError):
            get_measure(bad)


class TestCoupledDensity:
    @pytest.mark.parametrize("sub", [(1, 2, 3), (1, 2), (2, 3), (1, 3), (1,), (2,)])
    def test_marginal_matches_moments(self, sub):
        mu = CoupledChainMeasure()
        lo, hi = mu.box
        idx = [v - 1 for v in sub]
        quad = quadrature_moments(
            lambda x: mu.marginal_density(x, sub), (lo[idx], hi[idx]), tuple(range(1, len(sub) + 1)), 3
        )
        np.testing.assert_allclose(quad.entries, mu.moment_table(sub, 3).entries, atol=1e-12)
