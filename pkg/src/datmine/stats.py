"""Self-contained statistical kernels: Welch t-test, two-sample KS, proportion CI.

All distribution functions are implemented here (regularized incomplete beta
for the Student-t CDF, the Kolmogorov series for KS) so that results are
bit-stable and the package carries no statistics dependency.  scipy is used
only in the test suite, as an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

__all__ = [
    "TestResult",
    "welch_t",
    "ks_two_sample",
    "proportion_ci",
    "student_t_sf",
    "log_student_t_sf",
    "normal_cdf",
    "normal_quantile",
    "kolmogorov_sf",
]

_BETACF_MAX_ITER = 500
_BETACF_EPS = 1e-14
_TINY = 1e-300


@dataclass(frozen=True)
class TestResult:
    """Outcome of a hypothesis test.

    ``tail`` is one of ``left``, ``right``, ``two``.  ``df`` is None for tests
    without a degrees-of-freedom notion (KS).  ``log10_p`` is the base-10 log
    of the p-value, kept separately because extreme statistics underflow
    ``p_value`` to 0.0.
    """

    statistic: float
    df: Optional[float]
    p_value: float
    tail: str
    log10_p: float

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError(f"p_value {self.p_value} outside [0, 1]")
        if self.df is not None and not self.df > 0:
            raise ValueError(f"df must be positive, got {self.df}")


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularized incomplete beta (Lentz's method)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def _log_betai(a: float, b: float, x: float) -> float:
    """Natural log of the regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return -math.inf
    if x >= 1.0:
        return 0.0
    log_bt = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return log_bt + math.log(_betacf(a, b, x) / a)
    # complement is the small side; evaluate it and take log1p of the difference
    comp = math.exp(log_bt) * _betacf(b, a, 1.0 - x) / b
    return math.log1p(-min(comp, 1.0)) if comp < 1.0 else -math.inf


def _betai(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    return math.exp(_log_betai(a, b, x))


def log_student_t_sf(t: float, df: float) -> float:
    """log of P(T > t) for Student's t with ``df`` degrees of freedom.

    Computed through the incomplete beta so it stays finite far into the tail
    where the plain survival function underflows.
    """
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return -math.inf if t > 0 else 0.0
    if t >= 0:
        x = df / (df + t * t)
        return math.log(0.5) + _log_betai(df / 2.0, 0.5, x)
    p_other = student_t_sf(-t, df)
    return math.log1p(-p_other) if p_other < 1.0 else -math.inf


def student_t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with ``df`` degrees of freedom."""
    if t >= 0:
        return math.exp(log_student_t_sf(t, df))
    x = df / (df + t * t)
    return 1.0 - 0.5 * _betai(df / 2.0, 0.5, x)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


# Acklam's rational approximation to the inverse normal CDF, then one
# Halley refinement against erfc; accurate to ~1e-15 across (0, 1).
_NQ_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_NQ_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
_NQ_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_NQ_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly inside (0, 1)")
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((( _NQ_C[0] * q + _NQ_C[1]) * q + _NQ_C[2]) * q + _NQ_C[3]) * q + _NQ_C[4]) * q + _NQ_C[5]) / \
            (((( _NQ_D[0] * q + _NQ_D[1]) * q + _NQ_D[2]) * q + _NQ_D[3]) * q + 1.0)
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = ((((( _NQ_A[0] * r + _NQ_A[1]) * r + _NQ_A[2]) * r + _NQ_A[3]) * r + _NQ_A[4]) * r + _NQ_A[5]) * q / \
            ((((( _NQ_B[0] * r + _NQ_B[1]) * r + _NQ_B[2]) * r + _NQ_B[3]) * r + _NQ_B[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -((((( _NQ_C[0] * q + _NQ_C[1]) * q + _NQ_C[2]) * q + _NQ_C[3]) * q + _NQ_C[4]) * q + _NQ_C[5]) / \
            (((( _NQ_D[0] * q + _NQ_D[1]) * q + _NQ_D[2]) * q + _NQ_D[3]) * q + 1.0)
    # Halley step
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


def kolmogorov_sf(lam: float) -> float:
    """Survival function of the Kolmogorov distribution, Q(lambda).

    Uses the alternating series for large arguments and the theta-function
    dual series for small ones; terms are truncated below 1e-12.
    """
    if lam <= 0.0:
        return 1.0
    if lam < 1.18:
        # dual series converges fast for small lambda
        v = math.pi * math.pi / (8.0 * lam * lam)
        total = 0.0
        for k in range(1, 101):
            term = math.exp(-((2 * k - 1) ** 2) * v)
            total += term
            if term < 1e-12:
                break
        cdf = math.sqrt(2.0 * math.pi) / lam * total
        return min(max(1.0 - cdf, 0.0), 1.0)
    total = 0.0
    sign = 1.0
    for k in range(1, 101):
        term = math.exp(-2.0 * k * k * lam * lam)
        total += sign * term
        if term < 1e-12:
            break
        sign = -sign
    return min(max(2.0 * total, 0.0), 1.0)


def _mean_var(xs: Sequence[float]) -> tuple[float, float, int]:
    n = len(xs)
    mean = sum(xs) / n
    var = sum((x - mean) ** 2 for x in xs) / (n - 1)
    return mean, var, n


def welch_t(a: Sequence[float], b: Sequence[float], tail: str = "two") -> TestResult:
    """Welch's unequal-variance t-test.

    ``tail='right'`` tests H1: mean(a) > mean(b); ``'left'`` the reverse;
    ``'two'`` is nondirectional.  Requires at least two observations per
    sample.  When both samples have zero variance and equal means the
    statistic is 0 with p = 1 (two-tailed) / 0.5 (one-tailed).
    """
    if tail not in ("left", "right", "two"):
        raise ValueError(f"unknown tail {tail!r}")
    if len(a) < 2 or len(b) < 2:
        raise ValueError("welch_t requires at least 2 observations per sample")
    mean_a, var_a, n_a = _mean_var(a)
    mean_b, var_b, n_b = _mean_var(b)
    va, vb = var_a / n_a, var_b / n_b
    if va + vb == 0.0:
        if mean_a == mean_b:
            p = 1.0 if tail == "two" else 0.5
            return TestResult(0.0, float(n_a + n_b - 2), p, tail, math.log10(p))
        # deterministic separation: report an infinite statistic
        stat = math.inf if mean_a > mean_b else -math.inf
        df = float(n_a + n_b - 2)
        log_right = -math.inf if stat > 0 else 0.0
        return _t_result(stat, df, tail, log_right)
    stat = (mean_a - mean_b) / math.sqrt(va + vb)
    # Welch-Satterthwaite on normalized shares so tiny variances cannot
    # underflow the squared terms to 0/0
    ra, rb = va / (va + vb), vb / (va + vb)
    df = 1.0 / (ra * ra / (n_a - 1) + rb * rb / (n_b - 1))
    log_right = log_student_t_sf(stat, df)
    return _t_result(stat, df, tail, log_right)


def _t_result(stat: float, df: float, tail: str, log_p_right: float) -> TestResult:
    p_right = math.exp(log_p_right)
    if tail == "right":
        log_p = log_p_right
        p = p_right
    elif tail == "left":
        p = 1.0 - p_right
        log_p = math.log(p) if p > 0.0 else log_student_t_sf(-stat, df)
    else:
        if p_right <= 0.5:
            log_p = math.log(2.0) + log_p_right
            p = min(2.0 * p_right, 1.0)
        else:
            log_left = log_student_t_sf(-stat, df)
            log_p = math.log(2.0) + log_left
            p = min(2.0 * math.exp(log_left), 1.0)
    return TestResult(stat, df, p, tail, log_p / math.log(10.0))


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """Two-sample Kolmogorov-Smirnov test.

    D is the sup-distance between the right-continuous ECDFs evaluated at all
    pooled sample points (so ties are handled exactly); the p-value comes from
    the asymptotic Kolmogorov distribution at sqrt(n_eff) * D with
    n_eff = |a||b| / (|a| + |b|).
    """
    n_a, n_b = len(a), len(b)
    if n_a < 2 or n_b < 2:
        raise ValueError("ks_two_sample requires at least 2 observations per sample")
    xs_a = sorted(a)
    xs_b = sorted(b)
    d = 0.0
    i = j = 0
    while i < n_a or j < n_b:
        if j >= n_b or (i < n_a and xs_a[i] <= xs_b[j]):
            x = xs_a[i]
        else:
            x = xs_b[j]
        while i < n_a and xs_a[i] <= x:
            i += 1
        while j < n_b and xs_b[j] <= x:
            j += 1
        d = max(d, abs(i / n_a - j / n_b))
    n_eff = n_a * n_b / (n_a + n_b)
    p = kolmogorov_sf(math.sqrt(n_eff) * d)
    log10_p = math.log10(p) if p > 0.0 else -math.inf
    return TestResult(d, None, p, "two", log10_p)


def proportion_ci(successes: int, trials: int, level: float) -> tuple[float, float]:
    """Normal-approximation confidence interval for a proportion, clipped to [0, 1]."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes {successes} outside [0, {trials}]")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    p_hat = successes / trials
    z = normal_quantile(0.5 + level / 2.0)
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / trials)
    return max(p_hat - half, 0.0), min(p_hat + half, 1.0)
