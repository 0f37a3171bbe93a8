import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsecd.christoffel import (
    IllConditionedWarning,
    assemble,
    check_degree,
    evaluate,
    evaluate_regularized,
    evaluate_variational_oracle,
    factorize,
    fit_factor,
    legendre_christoffel,
    log_evaluate,
    log_evaluate_regularized,
    reconstruction_error,
)
from sparsecd.errors import InvalidArgumentError, SingularMomentMatrixError
from sparsecd.moments import (
    CoupledChainMeasure,
    MomentTable,
    ParabolicInterval,
    ProductMeasure,
    Provenance,
    SampleSet,
    UniformInterval,
    analytic_moments,
    empirical_moments,
    uniform_box,
)

MIXED = ProductMeasure([UniformInterval(-1, 1), ParabolicInterval(0, 2), UniformInterval(-0.5, 1.5)])


def factor(measure, vars, degree, mode="coord"):
    top = degree * (len(vars) if mode == "total" else 1)
    return fit_factor(analytic_moments(measure, vars, 2 * top), degree, mode)


class TestAssemble:
    def test_uniform_univariate(self):
        M = assemble(analytic_moments(uniform_box(1), (1,), 4), 2)
        np.testing.assert_allclose(M.matrix, [[1, 0, 1 / 3], [0, 1 / 3, 0], [1 / 3, 0, 1 / 5]])

    def test_pair_coordinatewise_size(self):
        M = assemble(analytic_moments(uniform_box(2), (1, 2), 2), 1, "coord")
        assert M.size == 4
        np.testing.assert_allclose(np.diag(M.matrix), [1, 1 / 3, 1 / 3, 1 / 9])

    def test_needs_double_degree(self):
        with pytest.raises(InvalidArgumentError):
            assemble(analytic_moments(uniform_box(1), (1,), 3), 2)

    def test_hankel_structure(self):
        M = assemble(analytic_moments(CoupledChainMeasure(), (1, 2), 6), 3, "total").matrix
        assert np.allclose(M, M.T)


class TestFactorize:
    def test_reconstruction(self):
        M = assemble(analytic_moments(CoupledChainMeasure(), (1, 2, 3), 4), 2, "coord")
        f = factorize(M)
        assert reconstruction_error(f, M) < 1e-12
        assert f.rcond > 0

    def test_singular_two_points(self):
        s = SampleSet(np.array([[0.0], [1.0]]))
        M = assemble(empirical_moments(s, (1,), 4), 2)
        with pytest.raises(SingularMomentMatrixError, match="positive definite"):
            factorize(M)

    def test_jitter_rescues_singular(self):
        s = SampleSet(np.array([[0.0], [1.0]]))
        M = assemble(empirical_moments(s, (1,), 4), 2)
        f = factorize(M, jitter=1e-6)
        assert f.jitter == 1e-6
        assert reconstruction_error(f, M) < 1e-12

    def test_negative_jitter(self):
        M = assemble(analytic_moments(uniform_box(1), (1,), 2), 1)
        with pytest.raises(InvalidArgumentError):
            factorize(M, jitter=-1.0)

    def test_warns_when_ill_conditioned(self):
        with pytest.warns(IllConditionedWarning):
            factor(uniform_box(2), (1, 2), 10)

    def test_well_conditioned_is_silent(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            factor(uniform_box(2), (1, 2), 3)

    def test_nonfinite_moments_rejected(self):
        with pytest.raises(Exception):
            MomentTable((1,), 2, np.array([1.0, np.inf, 1.0]), Provenance.ANALYTIC)


class TestEvaluate:
    def test_uniform_degree_two(self):
        f = factor(uniform_box(1), (1,), 2)
        assert evaluate(f, [1.0]) == pytest.approx(9.0, rel=1e-10)
        assert evaluate(f, [0.0]) == pytest.approx(2.25, rel=1e-10)

    def test_batch_and_log(self, rng):
        f = factor(MIXED, (1, 2, 3), 2)
        pts = rng.uniform(-2, 2, size=(20, 3))
        vals = evaluate(f, pts)
        np.testing.assert_allclose(np.log(vals), log_evaluate(f, pts), rtol=1e-12)
        assert evaluate(f, pts[3]) == pytest.approx(vals[3])

    def test_log_survives_huge_points(self):
        f = factor(uniform_box(1), (1,), 8)
        assert np.isfinite(log_evaluate(f, [1e50]))
        with np.errstate(over="ignore"):
            assert not np.isfinite(evaluate(f, [1e50]))
        # leading power x^16 dominates far out
        growth = log_evaluate(f, [1e50]) - log_evaluate(f, [1e25])
        assert growth == pytest.approx(16 * np.log(1e25), rel=1e-12)
        assert log_evaluate(f, [1e4]) == pytest.approx(np.log(legendre_christoffel(8, 1e4)), rel=1e-10)

    def test_legendre_oracle(self, rng):
        for n in range(11):
            f = factor(uniform_box(1), (1,), n)
            x = rng.uniform(-1.5, 1.5, size=(20, 1))
            np.testing.assert_allclose(evaluate(f, x), legendre_christoffel(n, x[:, 0]), rtol=1e-8)

    def test_legendre_shifted_interval(self):
        f = factor(ProductMeasure([UniformInterval(0, 2)]), (1,), 3)
        assert evaluate(f, [0.3]) == pytest.approx(legendre_christoffel(3, 0.3, 0, 2), rel=1e-10)

    @pytest.mark.parametrize("mode", ["coord", "total"])
    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_variational_oracle(self, rng, mode, degree):
        table = analytic_moments(CoupledChainMeasure(), (1, 2), 4 * degree)
        f = fit_factor(table, degree, mode)
        for z in rng.uniform(-1.5, 1.5, size=(10, 2)):
            assert evaluate(f, z) == pytest.approx(evaluate_variational_oracle(table, degree, mode, z), rel=1e-8)

    def test_dimension_mismatch(self):
        f = factor(uniform_box(2), (1, 2), 1)
        with pytest.raises(InvalidArgumentError):
            evaluate(f, [0.0, 0.0, 0.0])


class TestRegularized:
    def test_hand_computed(self):
        f = factor(uniform_box(1), (1,), 2)
        assert evaluate_regularized(f, [0.0], 1.0) == pytest.approx(1.703125, abs=1e-12)

    def test_below_point_value_at_origin(self):
        f = factor(uniform_box(1), (1,), 2)
        assert evaluate_regularized(f, [0.0], 1.0) < evaluate(f, [0.0])

    def test_small_box_limit(self, rng):
        f = factor(MIXED, (1, 2, 3), 2)
        for z in rng.uniform(-1, 1, size=(5, 3)):
            assert evaluate_regularized(f, z, 1e-5) == pytest.approx(evaluate(f, z), rel=1e-6)

    def test_log_consistency(self, rng):
        f = factor(MIXED, (1, 2), 3)
        z = rng.uniform(-1, 1, size=(8, 2))
        np.testing.assert_allclose(
            np.log(evaluate_regularized(f, z, 0.3)), log_evaluate_regularized(f, z, 0.3), rtol=1e-12
        )


class TestStructure:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_sandwich(self, rng, n):
        mu = CoupledChainMeasure()
        vars = (1, 2)
        lo = factor(mu, vars, n, "total")
        mid = factor(mu, vars, n, "coord")
        hi = factor(mu, vars, 2 * n, "total")
        z = rng.uniform(-2, 2, size=(50, 2))
        a, b, c = evaluate(lo, z), evaluate(mid, z), evaluate(hi, z)
        assert np.all(b - a >= -1e-9 * b)
        assert np.all(c - b >= -1e-9 * c)

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(0, 4), seed=st.integers(0, 1000))
    def test_at_least_one(self, n, seed):
        f = factor(CoupledChainMeasure(), (1, 2, 3), n)
        z = np.random.default_rng(seed).uniform(-3, 3, size=(20, 3))
        assert np.all(evaluate(f, z) >= 1 - 1e-12)

    @pytest.mark.parametrize("sub", [(1,), (2,), (1, 2), (2, 3), (1, 3)])
    def test_marginal_monotone(self, rng, sub):
        mu = CoupledChainMeasure()
        full = factor(mu, (1, 2, 3), 2)
        part = factor(mu, sub, 2)
        z = rng.uniform(-2, 2, size=(40, 3))
        zs = z[:, [v - 1 for v in sub]]
        assert np.all(evaluate(part, zs) <= evaluate(full, z) * (1 + 1e-9))

    def test_product_factorizes(self, rng):
        f = factor(MIXED, (1, 2, 3), 3)
        z = rng.uniform(-2, 3, size=(30, 3))
        parts = [evaluate(factor(MIXED, (v,), 3), z[:, [v - 1]]) for v in (1, 2, 3)]
        np.testing.assert_allclose(evaluate(f, z), np.prod(parts, axis=0), rtol=1e-8)

    def test_growth_dichotomy(self):
        inside, outside = [], []
        for n in range(2, 11):
            inside.append(legendre_christoffel(n, 0.3))
            outside.append(legendre_christoffel(n, 1.5))
        # polynomial growth inside, geometric outside
        assert inside[-1] < 11**2
        ratios = np.diff(np.log(outside))
        assert np.all(ratios > 1.0)

    def test_degree_zero(self):
        f = factor(MIXED, (1, 2), 0)
        assert evaluate(f, [5.0, -7.0]) == pytest.approx(1.0)


class TestLegendre:
    def test_endpoint(self):
        # sum (2k + 1) = (n + 1)^2
        assert legendre_christoffel(7, 1.0) == pytest.approx(64.0)

    def test_center_asymptotics(self):
        ratio = legendre_christoffel(100, 0.0) / 101
        assert ratio == pytest.approx(2 / np.pi, rel=0.03)

    def test_array(self):
        out = legendre_christoffel(2, np.array([0.0, 1.0]))
        np.testing.assert_allclose(out, [2.25, 9.0])


class TestGuardrail:
    def test_default_limit(self):
        check_degree(12)
        with pytest.raises(InvalidArgumentError):
            check_degree(13)

    def test_override(self):
        check_degree(20, max_degree=None)
