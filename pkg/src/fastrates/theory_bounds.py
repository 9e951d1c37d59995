"""Closed-form regret and estimation-rate bounds.

Every function evaluates a displayed expression directly; nothing here is
estimated from data.  Notation: ``a_n`` is the pointwise estimation rate,
``C`` its tail constant, ``(alpha, delta0)`` the margin exponent and scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate, optimize


class RegimeError(ValueError):
    """The requested bound does not apply at the given constants."""


@dataclass(frozen=True)
class RateConstants:
    alpha: float = 1.0
    delta0: float = 0.5
    delta1: float | None = None
    C: float = 36.0
    a_n: float = 0.01
    gamma: float = 0.9
    Q_max: float = 10.0
    # FQI
    M: float = 1.0
    B: float = 10.0
    d: int = 6
    lambda0: float = 0.1
    # MSBO
    zeta: float = 0.5
    M_prime: float = 10.0
    lambda0_prime: float = 0.1

    @property
    def effective_delta1(self) -> float:
        return self.delta0 if self.delta1 is None else self.delta1


def i_max(a_n: float, delta1: float) -> int:
    """Largest integer i with 2^(i+1) a_n < delta1."""
    if not delta1 > 2 * a_n:
        raise ValueError("need delta1 > 2 a_n")
    i = int(math.floor(math.log2(delta1 / a_n))) - 1
    while 2.0 ** (i + 1) * a_n >= delta1:
        i -= 1
    while 2.0 ** (i + 2) * a_n < delta1:
        i += 1
    return i


def _peeling_sum(alpha: float, terms: int) -> float:
    return math.fsum(math.exp(-(4.0 ** (i - 1))) * 2.0 ** ((alpha + 1) * i + 1)
                     for i in range(1, terms + 1))


def thm1_bound(k: RateConstants) -> float:
    """Two-term regret bound for a greedy policy with finite margin exponent."""
    delta1 = k.effective_delta1
    if not 0 < k.gamma < 1 or k.delta0 <= 0 or k.a_n <= 0 or k.C <= 0:
        raise ValueError("invalid constants")
    if not math.isfinite(k.alpha) or k.alpha < 0:
        raise ValueError("alpha must be finite and nonnegative; use cor2_bound for alpha = inf")
    if delta1 < k.delta0 or not delta1 > 2 * k.a_n:
        raise ValueError("need delta1 >= delta0 and delta1 > 2 a_n")
    imax = i_max(k.a_n, delta1)
    poly = (2.0 ** (k.alpha + 1) / ((1 - k.gamma) * k.delta0 ** k.alpha)
            * (1 + k.C * _peeling_sum(k.alpha, imax)) * k.a_n ** (k.alpha + 1))
    tail = 2 * k.Q_max * k.C / (1 - k.gamma) * math.exp(-(delta1 / (4 * k.a_n)) ** 2)
    return poly + tail


def upper_incomplete_gamma(s: float, x: float = 1.0, tol: float = 1e-10) -> float:
    """Gamma(s, x) = int_x^inf t^(s-1) e^(-t) dt by adaptive Gauss-Kronrod quadrature.

    The integral is cut at x + 40 (1 + s); the tail beyond that point is far
    below ``tol`` for the moderate s used here.
    """
    if s <= 0 or x <= 0:
        raise ValueError("need s > 0 and x > 0")
    upper = x + 40.0 * (1.0 + s)
    value, _ = integrate.quad(lambda t: t ** (s - 1) * math.exp(-t), x, upper,
                              epsabs=tol * 1e-2, epsrel=1e-13, limit=200)
    return value


def c_alpha(alpha: float, term_tol: float = 1e-15):
    """Return (series value, closed-form upper bound, terms used) for c(alpha)."""
    if alpha < 0 or not math.isfinite(alpha):
        raise ValueError("alpha must be finite and nonnegative")
    total = []
    i = 1
    while True:
        term = math.exp(-(4.0 ** (i - 1))) * 2.0 ** ((alpha + 1) * i + 1)
        total.append(term)
        if term < term_tol:
            break
        i += 1
    series = math.fsum(total)
    s = (alpha + 1) / 2
    upper = (2.0 ** (alpha + 1) * upper_incomplete_gamma(s, 1.0) / math.log(2)
             + 2 * (2 * (alpha + 1) / math.e) ** s)
    return series, upper, len(total)


def cor1_bound(k: RateConstants) -> float:
    series, _, _ = c_alpha(k.alpha)
    return (2.0 ** (k.alpha + 1) / ((1 - k.gamma) * k.delta0 ** k.alpha)
            * (1 + series * k.C) * k.a_n ** (k.alpha + 1))


def cor2_bound(k: RateConstants) -> float:
    if not k.a_n < k.delta0 / 2:
        raise RegimeError("need a_n < delta0 / 2")
    return 2 * k.Q_max * k.C / (1 - k.gamma) * math.exp(-(k.delta0 / (4 * k.a_n)) ** 2)


def fqi_an(n, d, M, B, gamma, lambda0) -> float:
    """Uniform estimation rate of linear FQI: 144 d (M + B) / ((1 - gamma) lambda0 sqrt n)."""
    if n <= 0 or d <= 0 or lambda0 <= 0 or not 0 < gamma < 1:
        raise ValueError("invalid constants")
    return 144 * d * (M + B) / ((1 - gamma) * lambda0 * math.sqrt(n))


def exponential_regime_threshold(d, M, B, gamma, lambda0, delta0) -> float:
    return (288 * d * (M + B) / ((1 - gamma) * lambda0 * delta0)) ** 2


def cor7_bounds(k: RateConstants, n) -> float:
    """Expected-regret bound of greedy linear FQI; regime chosen by ``k.alpha``."""
    g, d, MB = k.gamma, k.d, k.M + k.B
    if math.isinf(k.alpha):
        if n < exponential_regime_threshold(d, k.M, k.B, g, k.lambda0, k.delta0):
            raise RegimeError("n is below the exponential-regime threshold")
        rate = ((1 - g) * k.lambda0 * k.delta0 / (576 * d * MB)) ** 2
        return 12 * k.M * d / (1 - g) ** 2 * math.exp(-rate * n)
    a = k.alpha
    series, _, _ = c_alpha(a)
    return (288.0 ** (a + 1) * (1 + 6 * d * series) / ((1 - g) * k.delta0 ** a)
            * (d * MB / ((1 - g) * k.lambda0)) ** (a + 1) * n ** (-(a + 1) / 2))


def tabular_B(S, A, M, gamma) -> float:
    return math.sqrt(S * A) * M / (1 - gamma)


def _tabular_log_pair(S, A, M, B, gamma, lambda0, delta0, n):
    SA = S * A
    log_base = (math.log(432 * math.sqrt(math.pi) * SA ** 2 * (M + B)
                         / ((1 - gamma) ** 2 * lambda0)) - 0.5 * math.log(n))
    rate = ((1 - gamma) * lambda0 * delta0 / (576 * SA * (M + B))) ** 2
    log_expo = math.log(12 * M * SA / (1 - gamma) ** 2) - rate * n
    return log_base, log_expo


def tabular_bounds(S, A, M, B, gamma, lambda0, delta0, n):
    """(square-root baseline, exponential bound) for the tabular case.

    The exponential bound is None below its sample-size threshold.
    """
    if min(S, A, lambda0, delta0, n) <= 0 or not 0 < gamma < 1:
        raise ValueError("invalid constants")
    log_base, log_expo = _tabular_log_pair(S, A, M, B, gamma, lambda0, delta0, n)
    if n < exponential_regime_threshold(S * A, M, B, gamma, lambda0, delta0):
        return math.exp(log_base), None
    return math.exp(log_base), math.exp(log_expo)


def tabular_crossover(S, A, M, B, gamma, lambda0, delta0) -> float:
    """Sample size beyond which the exponential bound is below the baseline."""
    n0 = exponential_regime_threshold(S * A, M, B, gamma, lambda0, delta0)

    def gap(log_n):
        log_base, log_expo = _tabular_log_pair(S, A, M, B, gamma, lambda0, delta0,
                                               math.exp(log_n))
        return log_expo - log_base

    lo = math.log(n0)
    if gap(lo) < 0:
        return n0
    hi = lo + 1.0
    while gap(hi) > 0:
        hi += 1.0
    return math.exp(optimize.bisect(gap, lo, hi, xtol=1e-12, rtol=1e-15))


def msbo_an(n, d, M_prime, zeta, lambda0_prime, c_universal: float = 1.0) -> float:
    if n < 2:
        raise ValueError("need n >= 2")
    if min(d, M_prime, zeta, lambda0_prime, c_universal) <= 0:
        raise ValueError("constants must be positive")
    width = math.sqrt(d) + M_prime * math.sqrt(M_prime ** 2 / zeta + M_prime + zeta + 1) / lambda0_prime
    return c_universal * width * math.sqrt(math.log(n) / n)


def bounds_table(k: RateConstants, n_grid) -> list[dict]:
    """Every applicable bound at each n, for tabulation."""
    rows = []
    for n in n_grid:
        a_n = fqi_an(n, k.d, k.M, k.B, k.gamma, k.lambda0)
        row = {"n": n, "fqi_an": a_n,
               "msbo_an": msbo_an(n, k.d, k.M_prime, k.zeta, k.lambda0_prime) if n >= 2 else None}
        kk = RateConstants(**{**k.__dict__, "a_n": a_n, "C": 6 * k.d})
        try:
            row["cor7"] = cor7_bounds(kk, n)
        except RegimeError:
            row["cor7"] = None
        try:
            row["thm1"] = thm1_bound(kk) if math.isfinite(kk.alpha) else None
        except ValueError:
            row["thm1"] = None
        rows.append(row)
    return rows
