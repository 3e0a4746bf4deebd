"""Independent high-precision oracles used to freeze expected test values.

These deliberately avoid the code paths they check: binomial tails are
summed term by term with stdlib Decimal arithmetic at 60 significant
digits, starting from an exact integer binomial coefficient.
"""

import math
from decimal import Decimal, getcontext


def log2_binomial_tail(n: int, k: int, p: float) -> float:
    """log2 of P[X >= k] for X ~ Binomial(n, p), by direct Decimal summation."""
    if k == 0:
        return 0.0
    if p == 0.0:
        return -math.inf
    if p == 1.0:
        return 0.0
    getcontext().prec = 60
    pd = Decimal(p)
    qd = 1 - pd
    term = Decimal(math.comb(n, k)) * pd**k * qd ** (n - k)
    total = term
    for i in range(k, n):
        term = term * pd * (n - i) / (qd * (i + 1))
        total += term
        if term < total * Decimal("1e-45"):
            break
    return float(total.ln() / Decimal(2).ln())


def binomial_cdf(n: int, j: int, p: float) -> float:
    """P[X <= j] by Decimal summation (exact enough to order tail checks)."""
    if j < 0:
        return 0.0
    if j >= n:
        return 1.0
    getcontext().prec = 60
    pd = Decimal(p)
    qd = 1 - pd
    term = qd**n
    total = term
    for i in range(0, j):
        term = term * pd * (n - i) / (qd * (i + 1))
        total += term
    return float(total)
