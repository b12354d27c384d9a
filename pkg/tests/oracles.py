"""Independent reference computations. Nothing here imports the code under test."""

from fractions import Fraction
from math import factorial

import mpmath


def fisher_enumeration(a, b, c, d):
    """Two-sided Fisher p by brute-force enumeration of every 2x2 table with the same margins.

    Table probabilities use the factorial form r1! r2! c1! c2! / (n! a! b! c! d!).
    """
    r1, r2, c1, c2 = a + b, c + d, a + c, b + d
    n = r1 + r2
    if 0 in (r1, r2, c1, c2):
        return Fraction(1)
    num = factorial(r1) * factorial(r2) * factorial(c1) * factorial(c2)

    def prob(x11, x12, x21, x22):
        return Fraction(num, factorial(n) * factorial(x11) * factorial(x12) * factorial(x21) * factorial(x22))

    observed = prob(a, b, c, d)
    total = Fraction(0)
    for x11 in range(n + 1):
        for x12 in range(n + 1):
            x21, x22 = c1 - x11, c2 - x12
            if x11 + x12 != r1 or x21 < 0 or x22 < 0 or x21 + x22 != r2:
                continue
            p = prob(x11, x12, x21, x22)
            if p <= observed:
                total += p
    return total


def wilson_mp(k, n, confidence=0.95, dps=50):
    """Wilson score interval evaluated directly in 50-digit arithmetic."""
    with mpmath.workdps(dps):
        z = mpmath.sqrt(2) * mpmath.erfinv(mpmath.mpf(confidence))
        p = mpmath.mpf(k) / n
        denom = 1 + z**2 / n
        center = (p + z**2 / (2 * n)) / denom
        half = z * mpmath.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
        return center - half, center + half
