from __future__ import annotations

import json
from decimal import ROUND_FLOOR, Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from decograph.words import (
    GOLDEN,
    SILVER,
    ContinuedFraction,
    SturmianParameters,
    Word,
    WordError,
    adjacent_one_separations,
    continued_fraction_digits,
    empirical_frequency,
    generate_word,
    is_effectively_rational,
    letter_count,
    letter_frequencies,
    parse_alpha,
    sturmian_letter,
    sturmian_pattern_frequency,
)

getcontext().prec = 60
D_GOLDEN = (Decimal(5).sqrt() - 1) / 2
D_SILVER = Decimal(2).sqrt() - 1


def oracle_letter(alpha: Decimal, theta: Decimal, n: int) -> int:
    """High precision rotation coding, independent of the float code path."""
    y = n * alpha + theta
    x = y - y.to_integral_value(rounding=ROUND_FLOOR)
    return int(x >= 1 - alpha)


def oracle_cf(alpha: Decimal, depth: int) -> list[int]:
    out, x = [], alpha
    for _ in range(depth):
        inv = 1 / x
        c = int(inv)
        out.append(c)
        x = inv - c
    return out


# ----------------------------------------------------------- letters and words

def test_golden_first_letters():
    p = SturmianParameters(GOLDEN)
    assert sturmian_letter(p, 0) == 0
    assert sturmian_letter(p, 1) == 1


def test_left_endpoint_included():
    for alpha in (GOLDEN, SILVER, 0.3):
        p = SturmianParameters(alpha, 1 - alpha)
        assert sturmian_letter(p, 0) == 1


def test_generate_word_examples():
    p = SturmianParameters(GOLDEN)
    assert generate_word(p, 0, 5).letters == (0, 1, 0, 1, 1, 0)
    w = generate_word(p, 3, 3)
    assert w.letters == (1,) and w.origin_index == 3
    with pytest.raises(WordError):
        generate_word(p, 4, 3)


@pytest.mark.parametrize("alpha,dalpha", [(GOLDEN, D_GOLDEN), (SILVER, D_SILVER)])
def test_letters_match_high_precision_oracle(alpha, dalpha):
    p = SturmianParameters(alpha)
    w = generate_word(p, -500, 5000)
    expected = [oracle_letter(dalpha, Decimal(0), n) for n in range(-500, 5001)]
    assert list(w.letters) == expected


def test_rational_mode_agrees_with_oracle_far_out():
    p = SturmianParameters(GOLDEN, 0.0, "rational", depth=40)
    ns = [10**6, 10**6 + 1, 2 * 10**6 + 17]
    got = [sturmian_letter(p, n) for n in ns]
    assert got == [oracle_letter(D_GOLDEN, Decimal(0), n) for n in ns]


def test_parameter_validation():
    with pytest.raises(WordError):
        SturmianParameters(1.0)
    with pytest.raises(WordError):
        SturmianParameters(0.5, 1.0)
    with pytest.raises(WordError):
        SturmianParameters(0.5, 0.0, "exact")
    with pytest.raises(WordError):
        Word(())
    with pytest.raises(WordError):
        Word((0, 2))


def test_parse_alpha_names():
    assert parse_alpha("golden") == GOLDEN
    assert parse_alpha("Silver") == SILVER
    assert parse_alpha("1/3") == pytest.approx(1 / 3)
    with pytest.raises(WordError):
        parse_alpha("pi-ish")


def test_word_serialization_round_trip():
    p = SturmianParameters(GOLDEN, 0.25)
    w = generate_word(p, 7, 30)
    back = Word.from_json(w.to_json(p))
    assert back.letters == w.letters and back.origin_index == 7
    payload = json.loads(w.to_json(p))
    assert set(payload) == {"alpha", "theta", "origin", "letters"}
    assert Word.from_string(w.to_text()).letters == w.letters


# --------------------------------------------------------------------- counting

def test_letter_count_examples():
    w = Word((0, 1, 0, 1, 1, 0))
    assert letter_count(w, 1) == 3
    assert letter_count(w, 0) == 3
    assert letter_count(Word((0, 0, 0)), 1) == 0


def test_letter_frequencies():
    f = letter_frequencies(SturmianParameters(GOLDEN))
    assert f[1] == pytest.approx(0.6180339887, abs=1e-10)
    assert f[0] == pytest.approx(0.3819660113, abs=1e-10)
    assert f[0] + f[1] == 1.0
    g = letter_frequencies(SturmianParameters(SILVER))
    assert g[1] == pytest.approx(0.4142135624, abs=1e-10)
    assert g[0] == pytest.approx(0.5857864376, abs=1e-10)


def test_empirical_frequency_examples():
    assert empirical_frequency(Word((0, 1, 0, 1, 1, 0)), [1, 1]) == pytest.approx(1 / 5)
    assert empirical_frequency(Word((0,) * 50), [1]) == 0.0
    with pytest.raises(WordError):
        empirical_frequency(Word((0, 1)), [0, 1, 1])


def test_letter_count_discrepancy_bounded():
    # |count/N - alpha| <= C/N with C <= 3 (bounded discrepancy of rotations)
    w = np.array(generate_word(SturmianParameters(GOLDEN), 0, 10**6 - 1).letters)
    cum = np.cumsum(w)
    N = np.arange(1, len(w) + 1)
    assert np.max(np.abs(cum - N * GOLDEN)) <= 3


# ------------------------------------------------------------ continued fractions

def test_cf_examples():
    assert continued_fraction_digits(GOLDEN, 5).digits == (1, 1, 1, 1, 1)
    assert continued_fraction_digits(SILVER, 4).digits == (2, 2, 2, 2)
    assert continued_fraction_digits(1 / 3 + 1e-9, 1).digits == (2,)
    assert continued_fraction_digits(1 / 3 - 1e-9, 1).digits == (3,)


@pytest.mark.parametrize("dalpha", [D_GOLDEN, D_SILVER, Decimal(3).sqrt() - 1, Decimal(7).sqrt() - 2])
def test_cf_matches_decimal_oracle(dalpha):
    assert list(continued_fraction_digits(float(dalpha), 12).digits) == oracle_cf(dalpha, 12)


def test_cf_stops_for_rational_input():
    cf = continued_fraction_digits(3 / 8, 10)
    assert cf.digits == (2, 1, 2)
    assert is_effectively_rational(3 / 8)
    assert not is_effectively_rational(GOLDEN)
    with pytest.raises(WordError):
        ContinuedFraction((1, 0))


def test_cf_of_convergent_reproduces_prefix():
    cf = continued_fraction_digits(SILVER, 8)
    conv = cf.convergents()
    p, q = conv[-1].numerator, conv[-1].denominator
    # a deeper convergent has the same leading digits
    assert continued_fraction_digits(p / q, 6).digits == cf.digits[:6]


# ------------------------------------------------------------- pattern measures

def test_pattern_frequency_examples():
    assert sturmian_pattern_frequency(GOLDEN, [1, 1]).frequency == pytest.approx(2 * GOLDEN - 1, abs=1e-12)
    assert sturmian_pattern_frequency(GOLDEN, [0, 0]).frequency == 0.0
    for alpha in (GOLDEN, SILVER, 0.2718):
        assert sturmian_pattern_frequency(alpha, [1]).frequency == pytest.approx(alpha, abs=1e-14)


def test_adjacent_one_separations_golden():
    long, short = adjacent_one_separations(GOLDEN)
    assert long.pattern.to_text() == "101"
    assert short.pattern.to_text() == "11"
    assert long.frequency == pytest.approx(0.38197, abs=1e-5)
    assert short.frequency == pytest.approx(0.23607, abs=1e-5)


def test_adjacent_one_separations_silver():
    long, short = adjacent_one_separations(SILVER)
    assert long.pattern.to_text() == "1001"
    assert short.pattern.to_text() == "101"
    assert long.frequency == pytest.approx(0.17157, abs=1e-5)
    assert short.frequency == pytest.approx(0.24264, abs=1e-5)
    assert long.frequency + short.frequency == pytest.approx(SILVER, abs=1e-15)


def test_adjacent_one_separations_rejects_rational():
    with pytest.raises(WordError):
        adjacent_one_separations(0.4)


@pytest.mark.parametrize("alpha", [GOLDEN, SILVER])
def test_all_short_patterns_match_empirical(alpha):
    w = generate_word(SturmianParameters(alpha), 0, 10**6 - 1)
    rng = np.random.default_rng(1)
    for length in range(1, 7):
        for _ in range(6):
            pat = [int(x) for x in rng.integers(0, 2, length)]
            exact = sturmian_pattern_frequency(alpha, pat).frequency
            assert abs(exact - empirical_frequency(w, pat)) <= 1e-3, pat


# ---------------------------------------------------------------- properties

@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.0, 0.999), st.integers(-10**4, 10**4), st.integers(0, 60))
def test_generate_word_is_pointwise(alpha, theta, n0, length):
    p = SturmianParameters(alpha, theta)
    w = generate_word(p, n0, n0 + length)
    assert len(w) == length + 1
    assert all(w.letters[i] == sturmian_letter(p, n0 + i) for i in range(0, len(w), 7))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95))
def test_pattern_frequencies_of_fixed_length_sum_to_one(alpha):
    total = sum(
        sturmian_pattern_frequency(alpha, [(b >> j) & 1 for j in range(3)]).frequency for b in range(8)
    )
    assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.02, 0.98).filter(lambda a: not is_effectively_rational(a)))
def test_return_word_frequencies_sum_to_alpha(alpha):
    long, short = adjacent_one_separations(alpha)
    assert long.frequency > 0 and short.frequency > 0
    assert long.frequency + short.frequency == pytest.approx(alpha, abs=1e-12)
