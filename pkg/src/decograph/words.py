"""Sturmian words, letter/pattern counting and continued fractions.

A Sturmian word is the rotation coding

    omega(n) = 1  if  (n*alpha + theta) mod 1  lies in [1 - alpha, 1)
               0  otherwise

with the left endpoint of the interval included.  Other references use
(1 - alpha, 1]; the two conventions differ only on the orbit of the
discontinuity point and give the same subshift.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SILVER = math.sqrt(2.0) - 1.0

NAMED_ALPHAS = {"golden": GOLDEN, "silver": SILVER}

# remainder below which a continued-fraction expansion is declared finished
CF_TOL = 1e-12
# depth used to decide whether a float is "effectively rational"
RATIONAL_DEPTH = 16


class WordError(ValueError):
    pass


def parse_alpha(value) -> float:
    """Accept a float, a numeric string or one of the named constants."""
    if isinstance(value, str):
        key = value.strip().lower()
        if key in NAMED_ALPHAS:
            return NAMED_ALPHAS[key]
        try:
            value = float(Fraction(key)) if "/" in key else float(key)
        except ValueError as exc:
            raise WordError(f"cannot parse alpha {value!r}") from exc
    return float(value)


@dataclass(frozen=True)
class ContinuedFraction:
    digits: tuple[int, ...]

    def __post_init__(self):
        if any(d < 1 for d in self.digits):
            raise WordError("continued fraction digits must be >= 1")

    def convergents(self) -> list[Fraction]:
        """Convergents p_i/q_i of 1/(c1 + 1/(c2 + ...))."""
        out = []
        p_prev, p = 1, 0
        q_prev, q = 0, 1
        for c in self.digits:
            p_prev, p = p, c * p + p_prev
            q_prev, q = q, c * q + q_prev
            out.append(Fraction(p, q))
        return out


def continued_fraction_digits(alpha: float, depth: int) -> ContinuedFraction:
    """Digits c_1, c_2, ... of alpha = 1/(c_1 + 1/(c_2 + ...)).

    Stops early when the remainder drops below ``CF_TOL``; a result shorter
    than ``depth`` therefore flags an (effectively) rational input.  A value
    of 1/alpha within ``CF_TOL`` below an integer is rounded up, so
    1/3 + 1e-15 gives [3] rather than [2, 1, ...].
    """
    if isinstance(alpha, Fraction):
        return _cf_exact(alpha, depth)
    if not 0.0 < alpha < 1.0:
        raise WordError(f"alpha must lie in (0, 1), got {alpha}")
    if depth < 1:
        raise WordError("depth must be >= 1")
    digits = []
    x = float(alpha)
    for _ in range(depth):
        inv = 1.0 / x
        c = math.floor(inv)
        r = inv - c
        if 1.0 - r < CF_TOL:
            c, r = c + 1, 0.0
        digits.append(int(c))
        if r < CF_TOL:
            break
        x = r
    return ContinuedFraction(tuple(digits))


def _cf_exact(alpha: Fraction, depth: int) -> ContinuedFraction:
    if not 0 < alpha < 1:
        raise WordError(f"alpha must lie in (0, 1), got {alpha}")
    digits = []
    x = alpha
    for _ in range(depth):
        inv = 1 / x
        c = inv.numerator // inv.denominator
        digits.append(int(c))
        r = inv - c
        if r == 0:
            break
        x = r
    return ContinuedFraction(tuple(digits))


def is_effectively_rational(alpha: float, depth: int = RATIONAL_DEPTH) -> bool:
    return len(continued_fraction_digits(alpha, depth).digits) < depth


def first_digit(alpha: float) -> int:
    """c_1 = floor(1/alpha), with the same rounding guard as the full expansion."""
    return continued_fraction_digits(alpha, 1).digits[0]


@dataclass(frozen=True)
class SturmianParameters:
    """Rotation number, phase and evaluation mode of a Sturmian word.

    In ``"rational"`` mode the rotation is replaced by the continued-fraction
    convergent p/q at ``depth`` and ``n*alpha + theta mod 1`` is evaluated in
    exact integer arithmetic (theta is rationalised with denominator <= 10**12).
    """

    alpha: float
    theta: float = 0.0
    precision_mode: str = "float"
    depth: int = 20

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise WordError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 <= self.theta < 1.0:
            raise WordError(f"theta must lie in [0, 1), got {self.theta}")
        if self.precision_mode not in ("float", "rational"):
            raise WordError(f"unknown precision mode {self.precision_mode!r}")
        if self.precision_mode == "rational" and self.convergent().denominator < 2:
            raise WordError("rational mode needs a convergent with q >= 2")

    def convergent(self) -> Fraction:
        return continued_fraction_digits(self.alpha, self.depth).convergents()[-1]


@dataclass(frozen=True)
class Word:
    letters: tuple[int, ...]
    origin_index: int = 0
    alphabet_size: int = 2

    def __post_init__(self):
        if len(self.letters) == 0:
            raise WordError("a word must be non-empty")
        if any(a < 0 or a >= self.alphabet_size for a in self.letters):
            raise WordError("letter outside the alphabet")

    @classmethod
    def from_string(cls, text: str, origin_index: int = 0) -> "Word":
        text = text.strip()
        letters = tuple(int(ch) for ch in text)
        size = max(2, max(letters) + 1) if letters else 2
        return cls(letters, origin_index, size)

    def __len__(self) -> int:
        return len(self.letters)

    def __getitem__(self, i):
        return self.letters[i]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.letters, dtype=np.int64)

    def to_text(self) -> str:
        return "".join(str(a) for a in self.letters)

    def to_json(self, params: SturmianParameters | None = None) -> str:
        payload = {
            "alpha": None if params is None else params.alpha,
            "theta": None if params is None else params.theta,
            "origin": self.origin_index,
            "letters": list(self.letters),
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "Word":
        payload = json.loads(text)
        letters = tuple(int(a) for a in payload["letters"])
        return cls(letters, int(payload.get("origin", 0)), max(2, max(letters) + 1))


@dataclass(frozen=True)
class PatternFrequency:
    pattern: Word
    frequency: float

    def __post_init__(self):
        if not -1e-15 <= self.frequency <= 1.0 + 1e-15:
            raise WordError(f"frequency {self.frequency} outside [0, 1]")


def _rotation_points(params: SturmianParameters, n: np.ndarray) -> np.ndarray:
    return np.mod(n * params.alpha + params.theta, 1.0)


def sturmian_letter(params: SturmianParameters, n: int) -> int:
    return int(sturmian_letters(params, np.array([n]))[0])


def sturmian_letters(params: SturmianParameters, n: np.ndarray) -> np.ndarray:
    n = np.asarray(n, dtype=np.int64)
    if params.precision_mode == "rational":
        conv = params.convergent()
        p, q = conv.numerator, conv.denominator
        th = Fraction(params.theta).limit_denominator(10**12)
        tp, tq = th.numerator, th.denominator
        # frac(n p/q + tp/tq) >= 1 - p/q  <=>  (n p tq + tp q) mod (q tq) >= (q - p) tq
        modulus = q * tq
        vals = [((int(k) * p * tq + tp * q) % modulus) >= (q - p) * tq for k in n]
        return np.asarray(vals, dtype=np.int64)
    x = _rotation_points(params, n.astype(float))
    return (x >= 1.0 - params.alpha).astype(np.int64)


def generate_word(params: SturmianParameters, n0: int, n1: int) -> Word:
    """Letters omega(n0), ..., omega(n1) inclusive."""
    if n0 > n1:
        raise WordError(f"empty range n0={n0} > n1={n1}")
    letters = sturmian_letters(params, np.arange(n0, n1 + 1))
    return Word(tuple(int(a) for a in letters), n0, 2)


def letter_count(word: Word, a: int) -> int:
    return sum(1 for x in word.letters if x == a)


def letter_frequencies(params: SturmianParameters) -> dict[int, float]:
    return {0: 1.0 - params.alpha, 1: params.alpha}


def empirical_frequency(word: Word | Sequence[int], pattern: Word | Sequence[int]) -> float:
    """Fraction of sliding windows of ``word`` equal to ``pattern``."""
    w = np.asarray(word.letters if isinstance(word, Word) else word, dtype=np.int8)
    p = np.asarray(pattern.letters if isinstance(pattern, Word) else pattern, dtype=np.int8)
    if len(p) > len(w):
        raise WordError("pattern longer than word")
    windows = np.lib.stride_tricks.sliding_window_view(w, len(p))
    hits = np.all(windows == p, axis=1)
    return float(hits.sum()) / (len(w) - len(p) + 1)


def occurrences(word: Word | Sequence[int], pattern: Sequence[int]) -> int:
    w = np.asarray(word.letters if isinstance(word, Word) else word, dtype=np.int8)
    p = np.asarray(pattern, dtype=np.int8)
    if len(p) > len(w):
        return 0
    windows = np.lib.stride_tricks.sliding_window_view(w, len(p))
    return int(np.all(windows == p, axis=1).sum())


def sturmian_pattern_frequency(alpha: float, pattern: Word | Sequence[int]) -> PatternFrequency:
    """Exact frequency of ``pattern`` as the measure of its phase set.

    The phases theta with omega_{alpha,theta}(j) = W_j for all j form a finite
    union of arcs; the cut points are -j*alpha and 1 - alpha - j*alpha (mod 1)
    and each elementary arc between consecutive cut points is tested at its
    midpoint.
    """
    pat = tuple(pattern.letters if isinstance(pattern, Word) else pattern)
    if any(a not in (0, 1) for a in pat):
        raise WordError("Sturmian patterns are binary")
    js = np.arange(len(pat))
    cuts = np.concatenate([np.mod(-js * alpha, 1.0), np.mod(1.0 - alpha - js * alpha, 1.0), [0.0, 1.0]])
    cuts = np.unique(cuts)
    lo, hi = cuts[:-1], cuts[1:]
    mids = 0.5 * (lo + hi)
    x = np.mod(mids[:, None] + js[None, :] * alpha, 1.0)
    letters = (x >= 1.0 - alpha).astype(np.int64)
    match = np.all(letters == np.asarray(pat)[None, :], axis=1)
    freq = float(np.sum((hi - lo)[match]))
    return PatternFrequency(Word(pat if pat else (0,), 0, 2), min(max(freq, 0.0), 1.0))


def adjacent_one_separations(alpha: float) -> tuple[PatternFrequency, PatternFrequency]:
    """The two return words 1 0^k 1 of a Sturmian subshift and their frequencies.

    Returns ``(1 0^{c1} 1, 1 0^{c1-1} 1)`` with frequencies ``1 - c1*alpha`` and
    ``(c1 + 1)*alpha - 1``, where c1 = floor(1/alpha).
    """
    if is_effectively_rational(alpha):
        raise WordError(f"alpha={alpha} is (effectively) rational")
    c1 = first_digit(alpha)
    long_word = Word((1,) + (0,) * c1 + (1,))
    short_word = Word((1,) + (0,) * (c1 - 1) + (1,))
    return (
        PatternFrequency(long_word, 1.0 - c1 * alpha),
        PatternFrequency(short_word, (c1 + 1) * alpha - 1.0),
    )
