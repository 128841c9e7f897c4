"""Exact binomial and one-sample proportion z tests for field-test counts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .core import check_rate
from .errors import BadCounts, DegenerateNull, ValidationError

# Same relative slack scipy uses when collecting "as or less likely" outcomes.
_TWO_SIDED_RTOL = 1 + 1e-7


class Alternative(Enum):
    LESS = "less"
    GREATER = "greater"
    TWO_SIDED = "two-sided"

    @classmethod
    def parse(cls, value) -> "Alternative":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        if key in ("two", "twosided", "both"):
            key = "two-sided"
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(f"unknown alternative {value!r}") from None


class TestMethod(Enum):
    __test__ = False  # not a pytest class

    BINOMIAL_EXACT = "binomial_exact"
    Z_PROPORTION = "z_proportion"


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    p_value: float
    statistic: float
    method: TestMethod
    alternative: Alternative

    def to_dict(self) -> dict:
        return {
            "p_value": self.p_value,
            "statistic": self.statistic,
            "method": self.method.value,
            "alternative": self.alternative.value,
        }


_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_S0, _S1, _S2, _S3, _S4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188


def _stirlerr(n: float) -> float:
    """ln(n!) - ln(sqrt(2 pi n) (n/e)^n); lgamma for small n, Stirling series above."""
    if n <= 15.0:
        return math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - _LN_SQRT_2PI
    nn = n * n
    if n > 500:
        return (_S0 - _S1 / nn) / n
    if n > 80:
        return (_S0 - (_S1 - _S2 / nn) / nn) / n
    if n > 35:
        return (_S0 - (_S1 - (_S2 - _S3 / nn) / nn) / nn) / n
    return (_S0 - (_S1 - (_S2 - (_S3 - _S4 / nn) / nn) / nn) / nn) / n


def _bd0(x: float, mean: float) -> float:
    """x ln(x / mean) + mean - x, summed as a series when x is near mean."""
    if abs(x - mean) < 0.1 * (x + mean):
        v = (x - mean) / (x + mean)
        s = (x - mean) * v
        ej = 2.0 * x * v
        v2 = v * v
        for j in range(1, 1000):
            ej *= v2
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
    return x * math.log(x / mean) + mean - x


def log_binom_pmf(k: int, n: int, p: float) -> float:
    """log P(X = k) for X ~ Binomial(n, p).

    Saddle-point form: Stirling remainders plus deviance terms, so no
    n log n sized quantities cancel (plain lgamma loses ~1e-11 at n = 1e4).
    """
    if p == 0.0:
        return 0.0 if k == 0 else -math.inf
    if p == 1.0:
        return 0.0 if k == n else -math.inf
    if k == 0:
        return n * math.log1p(-p)
    if k == n:
        return n * math.log(p)
    lc = _stirlerr(n) - _stirlerr(k) - _stirlerr(n - k) - _bd0(k, n * p) - _bd0(n - k, n * (1.0 - p))
    return lc + 0.5 * math.log(n / (2.0 * math.pi * k * (n - k)))


def binom_pmf(k: int, n: int, p: float) -> float:
    return math.exp(log_binom_pmf(k, n, p))


def _check_counts(successes: int, trials: int) -> None:
    if int(trials) != trials or int(successes) != successes:
        raise BadCounts("counts must be integers")
    if trials < 1 or not 0 <= successes <= trials:
        raise BadCounts(f"need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")


def binomial_exact_test(successes: int, trials: int, null_p: float, alternative="two-sided") -> TestResult:
    _check_counts(successes, trials)
    null_p = check_rate(null_p, "null_p")
    alt = Alternative.parse(alternative)
    k, n = int(successes), int(trials)
    pmf = [binom_pmf(i, n, null_p) for i in range(n + 1)]
    if alt is Alternative.LESS:
        p = math.fsum(pmf[: k + 1])
    elif alt is Alternative.GREATER:
        p = math.fsum(pmf[k:])
    else:
        cutoff = pmf[k] * _TWO_SIDED_RTOL
        p = math.fsum(x for x in pmf if x <= cutoff)
    return TestResult(min(1.0, max(0.0, p)), k / n, TestMethod.BINOMIAL_EXACT, alt)


def _normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def proportion_z_test(successes: int, trials: int, null_p: float, alternative="two-sided") -> TestResult:
    _check_counts(successes, trials)
    null_p = check_rate(null_p, "null_p")
    if null_p in (0.0, 1.0):
        raise DegenerateNull("z test needs 0 < null_p < 1")
    alt = Alternative.parse(alternative)
    se = math.sqrt(null_p * (1.0 - null_p) / trials)
    z = (successes / trials - null_p) / se
    if alt is Alternative.LESS:
        p = _normal_cdf(z)
    elif alt is Alternative.GREATER:
        p = _normal_cdf(-z)
    else:
        p = 2.0 * _normal_cdf(-abs(z))
    return TestResult(min(1.0, max(0.0, p)), z, TestMethod.Z_PROPORTION, alt)
