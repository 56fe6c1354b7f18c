import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rbdsde.conditions import check_thm6
from rbdsde.delay_measure import DelayMeasure
from rbdsde.generator import Form, GeneratorSpec
from rbdsde.paths import simulate
from rbdsde.picard import Problem, beta_norm_distance, picard_map, solve
from rbdsde.scheme import ObstacleSpec, RegressionBasis, TerminalCondition

POINT0 = DelayMeasure.point_mass(0.0, 1.0)
LAG = DelayMeasure.from_pairs([(-0.2, 0.5), (0.0, 0.5)], 1.0)


def small_feasible_problem(ens, obstacle=None):
    """Problem whose constants pass the contraction check (kappa well below 1/2)."""
    spec = GeneratorSpec(Form.affine(0.05, 0.0, 0.1), Form.affine(0.02, 0.005), L=0.0025, alpha=1e-4)
    return Problem(ens, spec, LAG, obstacle or ObstacleSpec.put(0.0), TerminalCondition.put(0.0),
                   RegressionBasis(2), beta=0.2)


class TestDistance:
    def test_identical(self):
        Y, Z = np.ones((3, 5)), np.ones((3, 4))
        assert beta_norm_distance(Y, Z, Y, Z, 1.0, 0.25) == 0.0

    def test_unit_difference(self):
        Y, Z = np.ones((3, 5)), np.zeros((3, 4))
        assert beta_norm_distance(Y, Z, 0 * Y, Z, 0.0, 0.25) == pytest.approx(1.0, abs=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            beta_norm_distance(np.ones((3, 5)), np.ones((3, 4)), np.ones((3, 4)), np.ones((3, 4)), 1.0, 0.25)

    @given(st.integers(0, 2**32), st.floats(0.01, 50), st.floats(0, 5))
    def test_metric_properties(self, seed, lam, beta):
        rng = np.random.default_rng(seed)
        a, b, c = ((rng.standard_normal((4, 7)), rng.standard_normal((4, 6))) for _ in range(3))
        d = lambda x, y: beta_norm_distance(x[0], x[1], y[0], y[1], beta, 1 / 6)
        assert d(a, b) == pytest.approx(d(b, a), rel=1e-14)
        assert d(a, c) <= d(a, b) + d(b, c) + 1e-12
        zero = (np.zeros((4, 7)), np.zeros((4, 6)))
        assert d((lam * a[0], lam * a[1]), zero) == pytest.approx(lam * d(a, zero), rel=1e-12)


class TestSolve:
    @pytest.mark.parametrize("form", [Form.zero(), Form.constant(0.7), Form.from_tag("time_linear", [0.1, 1.0])])
    def test_input_independent_generator_converges_in_one(self, form, small_ensemble):
        spec = GeneratorSpec(form, form, 0.1, 0.1)
        p = Problem(small_ensemble, spec, POINT0, ObstacleSpec.none(), TerminalCondition.W_T())
        sol, diag = solve(p, tol=1e-12)
        assert diag.distances[1] == 0.0 and diag.iterations == 1 and diag.converged

    def test_zero_data(self, small_ensemble):
        p = Problem(small_ensemble, GeneratorSpec.zero(), POINT0, ObstacleSpec.linear(-1.0, 0.5),
                    TerminalCondition.constant(0.0))
        sol, diag = solve(p)
        assert np.all(sol.Y == 0) and np.all(np.abs(sol.Z) == 0) and np.all(sol.K == 0)

    def test_feasible_problem_contracts(self):
        ens = simulate(2000, 20, 1.0, 4)
        p = small_feasible_problem(ens)
        rep = check_thm6(0.2, 0.1, 0.0025, 1e-4, 1.0, p.measure)
        assert rep.feasible_thm6
        sol, diag = solve(p, tol=1e-10, max_iter=30)
        assert diag.converged and not diag.diverged
        d = diag.distances
        assert all(d[k + 1] <= d[k] for k in range(len(d) - 1))
        assert all(r is None or r <= 0.9 for r in diag.ratios[1:])

    def test_fixed_point_residual(self):
        ens = simulate(1000, 20, 1.0, 5)
        p = small_feasible_problem(ens)
        tol = 1e-9
        sol, diag = solve(p, tol=tol)
        again = picard_map(p, sol.Y, sol.Z)
        assert beta_norm_distance(again.Y, again.Z, sol.Y, sol.Z, p.beta, ens.dt) < 2 * tol

    def test_bitwise_reproducible(self):
        outs = []
        for _ in range(2):
            ens = simulate(500, 10, 1.0, 6)
            sol, diag = solve(small_feasible_problem(ens), tol=1e-10)
            outs.append((sol, diag))
        (a, da), (b, db) = outs
        assert np.array_equal(a.Y, b.Y) and np.array_equal(a.Z, b.Z) and np.array_equal(a.K, b.K)
        assert da.distances == db.distances

    def test_divergence_flagged(self, small_ensemble):
        spec = GeneratorSpec(Form.affine(200.0), Form.zero(), 1.0, 0.5, strict=False)
        p = Problem(small_ensemble, spec, POINT0, ObstacleSpec.none(), TerminalCondition.constant(1.0))
        sol, diag = solve(p, max_iter=10)
        assert diag.diverged and not diag.converged
        assert diag.distances[-1] > 10 * diag.distances[-2]

    def test_max_iter_without_convergence(self, small_ensemble):
        p = small_feasible_problem(small_ensemble)
        sol, diag = solve(p, tol=1e-300, max_iter=3)
        assert not diag.converged and len(diag.distances) == 3 and sol is not None

    def test_strict_problem_rejects_bad_point_delay(self, small_ensemble):
        spec = GeneratorSpec(Form.point_delay(0.3, 0.0, 0.0, -0.2), Form.zero(), 0.1, 0.1)
        with pytest.raises(ValueError, match="Lipschitz"):
            Problem(small_ensemble, spec, LAG, ObstacleSpec.none(), TerminalCondition.W_T())

    def test_point_delay_lag_snapped_with_measure(self):
        ens = simulate(50, 8, 1.0, 0)
        # -0.3 lies between grid points -0.25 and -0.375; measure and form must round alike
        m = DelayMeasure.from_pairs([(-0.3, 0.5), (0.0, 0.5)], 1.0)
        spec = GeneratorSpec(Form.point_delay(0.2, 0.0, 0.0, -0.3), Form.zero(), 0.1, 0.1)
        with pytest.warns(UserWarning):
            p = Problem(ens, spec, m, ObstacleSpec.none(), TerminalCondition.W_T())
        assert p.generator.f.lag == p.measure.lags[0]

    def test_diagnostics_json(self, small_ensemble):
        _, diag = solve(small_feasible_problem(small_ensemble), tol=1e-8)
        d = json.loads(diag.to_json())
        assert d["iterations"] == len(d["distances"]) - 1 and len(d["ratios"]) == d["iterations"]
