from fractions import Fraction
from functools import lru_cache

from hypothesis import given, settings, strategies as st
from pytest import approx, mark, raises

from emulator_forge.emulators import StretchParameterError
from emulator_forge.thresholds import (
    K_MAX,
    PrecisionCapError,
    compare_bounds,
    f_k,
    f_k_derivative,
    format_sweep_csv,
    format_threshold_csv,
    root_rk,
    threshold_table,
    winner_sweep,
    x_hat,
    x_min,
)


@lru_cache(maxsize=None)
def threshold(k):
    return root_rk(k).threshold


class TestPolynomial:

    def test_two(self):
        assert f_k(1, 2) == -19
        assert f_k(Fraction(35, 4), 2) == 12
        assert x_min(2) == Fraction(35, 8)
        assert x_hat(2) == Fraction(35, 4)

    @mark.parametrize('k', range(2, 11))
    def test_bracket(self, k):
        assert f_k(x_hat(k), k) == 2 ** (k + 2) - 4
        assert f_k(1, k) < 0
        assert f_k(x_min(k), k) < 0
        assert 1 < x_min(k) < x_hat(k)

    @mark.parametrize('k', range(2, 8))
    def test_derivative(self, k):
        assert f_k_derivative(x_min(k), k) == 0
        assert f_k_derivative(Fraction(1), k) < 0
        assert f_k_derivative(x_hat(k), k) > 0

    def test_bad_k(self):
        with raises(StretchParameterError):
            f_k(2, 1)


class TestRoot:

    def test_known(self):
        two = root_rk(2)
        assert two.threshold == 70
        assert two.theorem_threshold == 64
        assert float(two.root) == approx((35 + 1033 ** 0.5) / 8)
        assert root_rk(3).threshold == 5744
        assert root_rk(4).threshold == 4575579

    @mark.parametrize('k', range(2, K_MAX + 1))
    def test_root_in_bracket(self, k):
        result = root_rk(k)
        assert result.x_min < result.root < result.x_hat
        assert int(result.root ** k) == result.threshold

    @mark.parametrize('k', range(2, 8))
    def test_root_sign_change(self, k):
        root = float(root_rk(k).root)
        assert f_k(root * (1 - 1e-9), k) < 0
        assert f_k(root * (1 + 1e-9), k) > 0

    def test_table(self):
        table = threshold_table(K_MAX)
        assert [row.k for row in table] == list(range(2, K_MAX + 1))
        thresholds = [row.threshold for row in table]
        assert thresholds == sorted(thresholds)
        for row in table:
            assert row.theorem_threshold <= row.threshold

    def test_limits(self):
        with raises(PrecisionCapError) as info:
            threshold_table(K_MAX + 1)
        assert info.value.k_max == 13
        with raises(StretchParameterError):
            threshold_table(1)
        with raises(StretchParameterError):
            root_rk(1)


class TestCompareBounds:

    def test_two(self):
        ours, tz, winner = compare_bounds(70, 2)
        assert (ours, winner) == (362, 'ours')
        assert tz == approx(70 + 35 * 70 ** 0.5)
        assert compare_bounds(71, 2)[::2] == (367, 'tz')

    def test_sweep(self):
        rows = winner_sweep(2, range(1, 72))
        assert [row[0] for row in rows] == list(range(1, 72))
        assert all(row[3] == 'ours' for row in rows[:70])
        assert rows[70][3] == 'tz'

    @mark.parametrize('k', range(3, 7))
    def test_boundary(self, k):
        t = threshold(k)
        assert compare_bounds(t, k)[2] == 'ours'
        assert compare_bounds(t + 1, k)[2] == 'tz'

    @settings(deadline=None, max_examples=200)
    @given(st.integers(2, 5), st.integers(1, 10**7))
    def test_winner_matches_threshold(self, k, delta):
        expected = 'ours' if delta <= threshold(k) else 'tz'
        assert compare_bounds(delta, k)[2] == expected

    def test_bad_distance(self):
        for delta in (0, -3, 1.5, True):
            with raises(ValueError):
                compare_bounds(delta, 2)


class TestText:

    def test_threshold_csv(self):
        lines = format_threshold_csv(threshold_table(3)).splitlines()
        assert lines[0] == 'k,x_min,x_hat,root,threshold,theorem_threshold'
        assert lines[1].startswith('2,4.375,8.75,')
        assert lines[1].endswith(',70,64')
        assert lines[2].endswith(',5744,4913')

    def test_threshold_csv_digits(self):
        table = threshold_table(K_MAX)
        lines = format_threshold_csv(table).splitlines()[1:]
        for row, line in zip(table, lines):
            _, low, high, root, _, _ = line.split(',')
            assert Fraction(low) < Fraction(root) < Fraction(high)
            assert abs(Fraction(root) - row.root) < row.x_hat - row.root

    def test_sweep_csv(self):
        lines = format_sweep_csv(2, winner_sweep(2, [70, 71])).splitlines()
        assert lines[0] == 'k,delta,ours,tz,winner'
        assert lines[1].startswith('2,70,362,')
        assert lines[1].endswith(',ours')
        assert lines[2].endswith(',tz')
