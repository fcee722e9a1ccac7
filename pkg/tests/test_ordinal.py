import itertools
import math

import numpy as np
import pytest

from opd_lab.errors import InvalidInputError, UnsupportedOrderError
from opd_lab.ordinal import (
    OrdinalPattern,
    all_patterns,
    canonical_half,
    encode_increments,
    encode_pattern,
    increment_window_codes,
    space_reverse,
    time_reverse,
    window_codes,
)


def brute_force_pattern(x):
    """Search all permutations for the one meeting the ordering and tie rules."""
    h = len(x) - 1
    hits = []
    for perm in itertools.permutations(range(h + 1)):
        ok = True
        for i in range(1, h + 1):
            a, b = x[perm[i - 1]], x[perm[i]]
            if a < b or (a == b and perm[i - 1] > perm[i]):
                ok = False
                break
        if ok:
            hits.append(perm)
    assert len(hits) == 1, f"tie rule must give a unique pattern for {x}"
    return hits[0]


class TestEncodePattern:
    def test_worked_example(self):
        assert encode_pattern([10, 11, 5.5, 8]).perm == (1, 0, 3, 2)

    def test_increasing_triple(self):
        assert encode_pattern([0.1, 0.4, 0.6]).perm == (2, 1, 0)

    def test_tie_rule(self):
        assert encode_pattern([5, 5, 3]).perm == (0, 1, 2)

    def test_all_equal(self):
        assert encode_pattern([2.0, 2.0, 2.0, 2.0]).perm == (0, 1, 2, 3)

    @pytest.mark.parametrize("bad", [[1.0, np.nan], [np.inf, 0.0, 1.0], [-np.inf, 2.0]])
    def test_non_finite(self, bad):
        with pytest.raises(InvalidInputError):
            encode_pattern(bad)

    def test_too_short(self):
        with pytest.raises(InvalidInputError):
            encode_pattern([1.0])

    def test_matches_oracle_on_integer_grid(self):
        for h in (1, 2, 3):
            for x in itertools.product(range(h + 1), repeat=h + 1):
                assert encode_pattern(x).perm == brute_force_pattern(x), f"x={x}"

    def test_deterministic_on_equal_inputs(self):
        x = [3.0, 1.0, 3.0, 1.0]
        assert encode_pattern(x) == encode_pattern(list(x))


class TestEncodeIncrements:
    def test_worked_example(self):
        assert encode_increments([1, -5.5, 2.5]).perm == (1, 0, 3, 2)

    def test_increasing(self):
        assert encode_increments([1, 1]).perm == (2, 1, 0)

    def test_single_decrement(self):
        assert encode_increments([-1]).perm == (0, 1)

    def test_non_finite(self):
        with pytest.raises(InvalidInputError):
            encode_increments([1.0, np.nan])

    def test_integer_grid_consistency(self):
        # integer values make cumsum(diff(x)) exact, ties included
        for h in (1, 2, 3):
            for x in itertools.product(range(-1, h + 1), repeat=h + 1):
                x = np.asarray(x, dtype=float)
                shifted = x - x[0]
                assert encode_increments(np.diff(x)) == encode_pattern(shifted)
                assert encode_pattern(shifted) == encode_pattern(x)

    def test_random_consistency(self):
        rng = np.random.default_rng(5)
        for _ in range(2000):
            h = int(rng.integers(1, 6))
            x = rng.standard_normal(h + 1)
            assert encode_increments(np.diff(x)) == encode_pattern(x)


class TestReversals:
    def test_figure_examples(self):
        p = OrdinalPattern((1, 3, 2, 0))
        assert space_reverse(p).perm == (0, 2, 3, 1)
        assert time_reverse(p).perm == (2, 0, 1, 3)

    def test_small_cases(self):
        assert space_reverse(OrdinalPattern((2, 1, 0))).perm == (0, 1, 2)
        assert time_reverse(OrdinalPattern((0, 1, 2))).perm == (2, 1, 0)

    @pytest.mark.parametrize("h", [1, 2, 3, 4])
    def test_involutions_and_bijections(self, h):
        pats = all_patterns(h)
        assert {space_reverse(space_reverse(p)) for p in pats} == set(pats)
        assert all(time_reverse(time_reverse(p)) == p for p in pats)
        assert {space_reverse(p) for p in pats} == set(pats)
        assert {time_reverse(p) for p in pats} == set(pats)

    def test_space_reversal_matches_negation(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            x = rng.standard_normal(4)
            assert encode_pattern(-x) == space_reverse(encode_pattern(x))

    def test_time_reversal_matches_reversed_window(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            x = rng.standard_normal(4)
            assert encode_pattern(x[::-1]) == time_reverse(encode_pattern(x))


class TestAllPatterns:
    def test_h1(self):
        assert [p.perm for p in all_patterns(1)] == [(0, 1), (1, 0)]

    def test_h2_set(self):
        expected = {(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)}
        pats = all_patterns(2)
        assert len(pats) == 6 and {p.perm for p in pats} == expected

    @pytest.mark.parametrize("h", [1, 2, 3, 4, 5, 6])
    def test_sizes_and_order(self, h):
        pats = all_patterns(h)
        assert len(pats) == math.factorial(h + 1)
        assert [p.perm for p in pats] == sorted(p.perm for p in pats)
        assert [p.code for p in pats[:50]] == list(range(min(50, len(pats))))

    @pytest.mark.parametrize("h", [0, 7, -1])
    def test_guard(self, h):
        with pytest.raises(UnsupportedOrderError):
            all_patterns(h)


class TestCanonicalHalf:
    def test_h1(self):
        assert {p.perm for p in canonical_half(1).members} == {(0, 1)}

    def test_h2(self):
        half = canonical_half(2)
        assert len(half) == 3
        assert {p.perm for p in half.members} == {(0, 1, 2), (0, 2, 1), (1, 0, 2)}

    @pytest.mark.parametrize("h", [1, 2, 3, 4, 5])
    def test_partition(self, h):
        half = canonical_half(h)
        mirrored = {space_reverse(p) for p in half.members}
        assert len(half) == math.factorial(h + 1) // 2
        assert not (mirrored & set(half.members))
        assert mirrored | set(half.members) == set(all_patterns(h))

    def test_alternative_choice_is_valid_half_set(self):
        choice = {OrdinalPattern(p) for p in [(2, 1, 0), (2, 0, 1), (1, 2, 0)]}
        mirrored = {space_reverse(p) for p in choice}
        assert not (choice & mirrored)
        assert choice | mirrored == set(all_patterns(2))

    def test_guard(self):
        with pytest.raises(UnsupportedOrderError):
            canonical_half(7)


class TestPatternType:
    def test_serialization_round_trip(self):
        p = OrdinalPattern((1, 0, 3, 2))
        assert str(p) == "1,0,3,2"
        assert OrdinalPattern.parse("1,0,3,2") == p
        assert p.h == 3

    @pytest.mark.parametrize("perm", [(0, 0, 1), (1, 2), (0,), (0, 1, 3)])
    def test_invalid(self, perm):
        with pytest.raises(InvalidInputError):
            OrdinalPattern(perm)

    def test_parse_garbage(self):
        with pytest.raises(InvalidInputError):
            OrdinalPattern.parse("a,b")


class TestWindowCodes:
    def test_matches_scalar_encoder(self):
        rng = np.random.default_rng(2)
        x = np.round(rng.standard_normal(300), 1)  # rounding forces ties
        for h in (1, 2, 3):
            codes = window_codes(x, h)
            pats = all_patterns(h)
            assert codes.size == x.size - h
            for j in range(codes.size):
                assert pats[codes[j]] == encode_pattern(x[j : j + h + 1])

    def test_increment_codes_match_scalar_encoder(self):
        rng = np.random.default_rng(3)
        y = rng.standard_normal(200)
        for h in (1, 2, 3):
            codes = increment_window_codes(y, h)
            pats = all_patterns(h)
            assert codes.size == y.size - h + 1
            for j in range(codes.size):
                assert pats[codes[j]] == encode_increments(y[j : j + h])

    def test_too_short(self):
        with pytest.raises(InvalidInputError):
            window_codes([1.0, 2.0], 2)
        with pytest.raises(InvalidInputError):
            increment_window_codes([1.0], 2)

    @pytest.mark.parametrize("h", [1, 2])
    def test_exchangeable_values_give_uniform_patterns(self, h):
        n = 10**5
        rows = np.random.default_rng(10 + h).standard_normal((n, h + 1))
        # independent windows: codes of the flattened series at stride h + 1
        codes = window_codes(rows.reshape(-1), h)[:: h + 1]
        assert codes.size == n
        counts = np.bincount(codes, minlength=math.factorial(h + 1))
        p = 1.0 / math.factorial(h + 1)
        sd = math.sqrt(n * p * (1 - p))
        assert np.all(np.abs(counts - n * p) < 3 * sd), counts
