import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rbdsde.delay_measure import (DelayMeasure, LagSnapWarning, delayed_aggregate, delayed_aggregate_grid,
                                  delayed_sq_distance, fubini_sides, gamma_tilde)


@st.composite
def measures(draw, horizon=1.0, n_steps=20):
    dt = horizon / n_steps
    k = draw(st.integers(1, 4))
    steps = draw(st.lists(st.integers(0, n_steps), min_size=k, max_size=k, unique=True))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k))
    total = math.fsum(raw)
    weights = [r / total for r in raw]
    weights[-1] = 1.0 - math.fsum(weights[:-1])
    return DelayMeasure.from_pairs([(-s * dt, w) for s, w in zip(steps, weights)], horizon)


class TestValidation:
    def test_lag_out_of_range_names_atom(self):
        with pytest.raises(ValueError, match="atom 1"):
            DelayMeasure((-0.5, 0.2), (0.5, 0.5), 1.0)

    def test_lag_below_horizon(self):
        with pytest.raises(ValueError, match="atom 0"):
            DelayMeasure((-1.5,), (1.0,), 1.0)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            DelayMeasure((-0.5, 0.0), (0.5, 0.4), 1.0)

    def test_nonpositive_weight(self):
        with pytest.raises(ValueError, match="atom 0"):
            DelayMeasure((-0.5, 0.0), (0.0, 1.0), 1.0)

    def test_duplicate_lags(self):
        with pytest.raises(ValueError):
            DelayMeasure.from_pairs([(-0.5, 0.5), (-0.5, 0.5)], 1.0)

    def test_from_pairs_sorts(self):
        m = DelayMeasure.from_pairs([(0.0, 0.25), (-0.5, 0.75)], 1.0)
        assert m.lags == (-0.5, 0.0)
        assert m.weights == (0.75, 0.25)


class TestGammaTilde:
    def test_point_mass_at_zero(self):
        assert gamma_tilde(DelayMeasure.point_mass(0.0, 1.0), 7.3) == 1.0

    def test_beta_zero_is_total_mass(self):
        assert gamma_tilde(DelayMeasure.point_mass(-1.0, 1.0), 0.0) == 1.0

    def test_two_atom_hand_value(self):
        m = DelayMeasure.from_pairs([(-1.0, 0.5), (0.0, 0.5)], 1.0)
        assert gamma_tilde(m, math.log(2.0)) == 1.5

    @given(measures())
    def test_zero_beta_exactly_one(self, m):
        assert gamma_tilde(m, 0.0) == pytest.approx(1.0, abs=1e-15)

    @given(measures(), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
    def test_nondecreasing_in_beta(self, m, b1, b2):
        lo, hi = sorted((b1, b2))
        assert gamma_tilde(m, lo) <= gamma_tilde(m, hi)
        assert gamma_tilde(m, lo) >= 1.0 - 1e-15


class TestAggregate:
    def test_constant_path(self):
        m = DelayMeasure.from_pairs([(-0.5, 0.3), (-0.25, 0.3), (0.0, 0.4)], 1.0)
        x = np.full(5, 2.5)
        assert delayed_aggregate(x, 4, m, 0.25) == pytest.approx(2.5, rel=1e-15)

    def test_identity_lag(self):
        x = np.array([0.3, -1.0, 4.0, 2.0])
        m = DelayMeasure.point_mass(0.0, 1.0)
        assert all(delayed_aggregate(x, i, m, 1 / 3) == x[i] for i in range(4))

    def test_zero_extension(self):
        t = np.linspace(0.0, 1.0, 5)
        assert delayed_aggregate(t, 1, DelayMeasure.point_mass(-0.5, 1.0), 0.25) == 0.0

    def test_sq_distance_hand_values(self):
        t = np.linspace(0.0, 1.0, 5)
        m = DelayMeasure.from_pairs([(-0.5, 0.5), (0.0, 0.5)], 1.0)
        assert delayed_sq_distance(t, t, 2, m, 0.25) == 0.0
        assert delayed_sq_distance(np.ones(5), np.zeros(5), 4, m, 0.25) == 1.0
        assert delayed_sq_distance(t, np.zeros(5), 2, m, 0.25) == pytest.approx(0.125, abs=1e-15)

    @given(measures(), st.lists(st.floats(-5, 5), min_size=21, max_size=21),
           st.lists(st.floats(-5, 5), min_size=21, max_size=21), st.floats(-3, 3))
    def test_linear_in_path(self, m, x, y, c):
        x, y = np.array(x), np.array(y)
        for i in (0, 7, 20):
            lhs = delayed_aggregate(x + c * y, i, m, 0.05)
            rhs = delayed_aggregate(x, i, m, 0.05) + c * delayed_aggregate(y, i, m, 0.05)
            assert lhs == pytest.approx(rhs, abs=1e-10)

    @given(measures(), st.lists(st.floats(-5, 5), min_size=21, max_size=21))
    def test_grid_matches_scalar(self, m, x):
        x = np.array(x)
        grid = delayed_aggregate_grid(x, m, 0.05)
        for i in range(21):
            assert grid[i] == pytest.approx(delayed_aggregate(x, i, m, 0.05), abs=1e-12)


class TestFubini:
    @given(measures(), st.lists(st.floats(-5, 5), min_size=20, max_size=20), st.floats(0.0, 8.0))
    def test_inequality(self, m, z, beta):
        lhs, rhs = fubini_sides(np.array(z), m, beta, 0.05)
        assert lhs <= rhs * (1 + 1e-12) + 1e-300

    def test_equality_when_shifts_stay_inside(self):
        # z vanishes on the last lag-length of the grid, so no shifted term is dropped
        m = DelayMeasure.from_pairs([(-0.25, 0.5), (0.0, 0.5)], 1.0)
        z = np.zeros(20)
        z[:15] = np.linspace(1.0, 2.0, 15)
        lhs, rhs = fubini_sides(z, m, 1.3, 0.05)
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestSnapping:
    def test_on_grid_no_warning(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            m = DelayMeasure.point_mass(-0.25, 1.0).snapped(0.025)
        assert m.lag_steps(0.025).tolist() == [10]

    def test_off_grid_warns_and_snaps(self):
        with pytest.warns(LagSnapWarning):
            m = DelayMeasure.point_mass(-0.26, 1.0).snapped(0.1)
        assert m.lags == pytest.approx((-0.3,))

    def test_colliding_atoms_merge(self):
        with pytest.warns(LagSnapWarning):
            m = DelayMeasure.from_pairs([(-0.21, 0.5), (-0.19, 0.5)], 1.0).snapped(0.1)
        assert len(m.lags) == 1 and m.weights == pytest.approx((1.0,))
