"""Chi-square distribution functions used by the spoofing test.

Everything here is a pure function of its arguments. The regularized lower
incomplete gamma function is evaluated with the usual split between a power
series (x < s + 1) and a Lentz continued fraction for the complement. The
noncentral CDF is the Poisson-weighted mixture of central CDFs, summed over a
window around the Poisson mode that is widened until the neglected Poisson
mass is below ``SERIES_TAIL``.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "NumericsDomainError",
    "ConvergenceError",
    "regularized_lower_gamma",
    "chi2_cdf",
    "chi2_inv_cdf",
    "noncentral_chi2_cdf",
]

EPS = 1e-16
TINY = 1e-300
MAX_ITER = 100_000
SERIES_TAIL = 1e-12
INV_RTOL = 1e-10
# beyond this many Poisson terms the series is declared non-convergent
MAX_SERIES_TERMS = 50_000_000


class NumericsDomainError(ValueError):
    """An argument lies outside the domain of the function."""


class ConvergenceError(ArithmeticError):
    """An iterative evaluation did not reach its tolerance."""


def _log_prefactor(s, x):
    """log(x**s * exp(-x) / Gamma(s)), without cancellation between s*log(x) and lgamma(s)."""
    t = (x - s) / s
    # far from x = s the result is tiny and the direct form is accurate enough
    if s < 20.0 or abs(t) > 0.5:
        return s * math.log(x) - x - math.lgamma(s)
    # lgamma(s) = (s - 1/2) log s - s + log(2 pi)/2 + stirling remainder
    r = 1.0 / s
    r2 = r * r
    remainder = r * (1 / 12 - r2 * (1 / 360 - r2 * (1 / 1260 - r2 * (1 / 1680 - r2 / 1188))))
    return s * (math.log1p(t) - t) + 0.5 * math.log(s) - 0.5 * math.log(2.0 * math.pi) - remainder


def _gamma_series(s, x):
    # P(s, x) by the power series; valid and fast for x < s + 1
    term = 1.0 / s
    total = term
    a = s
    for _ in range(MAX_ITER):
        a += 1.0
        term *= x / a
        total += term
        if abs(term) < abs(total) * EPS:
            return total * math.exp(_log_prefactor(s, x))
    raise ConvergenceError(f"incomplete gamma series failed for s={s}, x={x}")


def _gamma_cfrac(s, x):
    # Q(s, x) = 1 - P(s, x) by modified Lentz; valid for x >= s + 1
    b = x + 1.0 - s
    c = 1.0 / TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < TINY:
            d = TINY
        c = b + an / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return math.exp(_log_prefactor(s, x)) * h
    raise ConvergenceError(f"incomplete gamma continued fraction failed for s={s}, x={x}")


def regularized_lower_gamma(s: float, x: float) -> float:
    """Regularized lower incomplete gamma function P(s, x).

    Raises NumericsDomainError for s <= 0 or x < 0.

    >>> round(regularized_lower_gamma(1.0, 1.0), 7)
    0.6321206
    """
    if not s > 0 or not math.isfinite(s):
        raise NumericsDomainError(f"shape must be positive and finite, got {s}")
    if not x >= 0:
        raise NumericsDomainError(f"argument must be nonnegative, got {x}")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < s + 1.0:
        return min(_gamma_series(s, x), 1.0)
    return max(1.0 - _gamma_cfrac(s, x), 0.0)


def _check_dof(dof):
    if int(dof) != dof or dof < 1:
        raise NumericsDomainError(f"degrees of freedom must be a positive integer, got {dof}")
    return int(dof)


def chi2_cdf(x: float, dof: int) -> float:
    """CDF of the central chi-square distribution with ``dof`` degrees of freedom."""
    dof = _check_dof(dof)
    if not x >= 0:
        raise NumericsDomainError(f"x must be nonnegative, got {x}")
    return regularized_lower_gamma(dof / 2.0, x / 2.0)


def _chi2_quantile_guess(p, dof):
    # Wilson-Hilferty cube-root normal approximation
    z = _normal_quantile(p)
    h = 2.0 / (9.0 * dof)
    return max(dof * (1.0 - h + z * math.sqrt(h)) ** 3, 1e-8)


def _normal_quantile(p):
    # Acklam's rational approximation; only used to seed the bracket
    a = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
         1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
    b = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
         6.680131188771972e01, -1.328068155288572e01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
         -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
         3.754408661907416e00)
    p = min(max(p, 1e-300), 1.0 - 1e-16)
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if p > 1.0 - 0.02425:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)


def chi2_inv_cdf(p: float, dof: int) -> float:
    """Inverse of :func:`chi2_cdf` in its first argument.

    The root is bracketed around a Wilson-Hilferty starting point and then
    refined by Illinois-style false position with a bisection fallback, to a
    relative tolerance of ``INV_RTOL`` in x.
    """
    dof = _check_dof(dof)
    if not 0.0 <= p < 1.0:
        raise NumericsDomainError(f"p must lie in [0, 1), got {p}")
    if p == 0.0:
        return 0.0

    def f(x):
        return chi2_cdf(x, dof) - p

    guess = _chi2_quantile_guess(p, dof)
    lo, hi = guess, guess
    flo = fhi = f(guess)
    for _ in range(2000):
        if flo <= 0.0:
            break
        lo *= 0.5
        flo = f(lo)
    else:
        raise ConvergenceError(f"could not bracket the {p} quantile from below (dof={dof})")
    for _ in range(2000):
        if fhi >= 0.0:
            break
        hi *= 2.0
        fhi = f(hi)
    else:
        raise ConvergenceError(f"could not bracket the {p} quantile from above (dof={dof})")
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi

    side = 0
    for _ in range(MAX_ITER):
        if hi - lo <= INV_RTOL * hi:
            return 0.5 * (lo + hi)
        x = (lo * fhi - hi * flo) / (fhi - flo)
        # keep false position honest: fall back to bisection near the ends
        if not lo < x < hi or min(x - lo, hi - x) < 1e-3 * (hi - lo):
            x = 0.5 * (lo + hi)
        fx = f(x)
        if fx == 0.0:
            return x
        if fx < 0.0:
            lo, flo = x, fx
            if side == -1:
                fhi *= 0.5
            side = -1
        else:
            hi, fhi = x, fx
            if side == 1:
                flo *= 0.5
            side = 1
    raise ConvergenceError(f"quantile solver did not converge for p={p}, dof={dof}")


def _chernoff_lower_tail(x, dof, mu):
    """Upper bound on Pr(X <= x) for X ~ noncentral chi2(dof, mu), x below the mean.

    Uses the moment generating function at the optimal negative argument;
    for x >= dof + mu the bound is vacuous and 1.0 is returned.
    """
    if x <= 0.0:
        return 0.0
    if x >= dof + mu:
        return 1.0
    u = (dof + math.sqrt(dof * dof + 4.0 * x * mu)) / (2.0 * x)
    log_bound = 0.5 * x * (u - 1.0) - 0.5 * dof * math.log(u) - 0.5 * mu * (u - 1.0) / u
    return math.exp(min(log_bound, 0.0))


def _poisson_window(lam):
    """Index window [lo, hi] whose Poisson(lam) mass excludes < SERIES_TAIL."""
    mode = int(math.floor(lam))
    spread = math.sqrt(lam) if lam > 0 else 0.0
    width = int(math.ceil(8.0 * spread)) + 16
    while True:
        if 2 * width > MAX_SERIES_TERMS:
            raise ConvergenceError(f"Poisson window exceeds {MAX_SERIES_TERMS} terms (lambda={lam})")
        lo = max(mode - width, 0)
        hi = mode + width
        # geometric bounds on each tail, from the monotone term ratios
        log_w = lambda j: -lam + j * math.log(lam) - math.lgamma(j + 1.0)  # noqa: E731
        upper_ratio = lam / (hi + 2.0)
        upper_tail = math.exp(log_w(hi + 1)) / (1.0 - upper_ratio)
        if lo == 0:
            lower_tail = 0.0
        else:
            lower_ratio = (lo - 1.0) / lam
            lower_tail = math.exp(log_w(lo - 1)) / (1.0 - lower_ratio)
        if upper_tail + lower_tail < SERIES_TAIL:
            return lo, hi
        width *= 2


def noncentral_chi2_cdf(x: float, dof: int, mu: float) -> float:
    """CDF of the noncentral chi-square distribution.

    Computed as ``sum_j Pois(j; mu/2) * chi2_cdf(x, dof + 2j)``. The central
    terms are produced from the top of the summation window downward with
    the recurrence ``P(s - 1, y) = P(s, y) + y**(s-1) e**-y / Gamma(s)``,
    which only ever adds positive quantities.

    When a Chernoff bound already certifies that the CDF is below
    ``SERIES_TAIL`` the series is skipped and 0.0 is returned.
    """
    dof = _check_dof(dof)
    if not x >= 0:
        raise NumericsDomainError(f"x must be nonnegative, got {x}")
    if not mu >= 0 or not math.isfinite(mu):
        raise NumericsDomainError(f"noncentrality must be finite and nonnegative, got {mu}")
    if x == 0.0:
        return 0.0
    if 0.5 * mu == 0.0:
        # also catches subnormal mu whose half underflows
        return chi2_cdf(x, dof)
    if math.isinf(x):
        return 1.0
    if _chernoff_lower_tail(x, dof, mu) < SERIES_TAIL:
        return 0.0

    lam = 0.5 * mu
    y = 0.5 * x
    lo, hi = _poisson_window(lam)
    j = np.arange(lo, hi + 1, dtype=float)

    log_w = np.empty_like(j)
    log_w[0] = -lam + lo * math.log(lam) - math.lgamma(lo + 1.0)
    log_w[1:] = math.log(lam) - np.log(j[1:])
    log_w = np.cumsum(log_w)

    # central CDFs P(dof/2 + j, y) for j = hi, hi-1, ..., lo
    s = 0.5 * dof + j[::-1]
    p_top = regularized_lower_gamma(s[0], y)
    log_t = np.empty(len(s) - 1)
    if len(log_t):
        # log of y**(s-1) e**-y / Gamma(s), for s = s_top, s_top - 1, ...
        log_t[0] = _log_prefactor(s[0], y) - math.log(y)
        log_t[1:] = np.log(s[1:-1]) - math.log(y)
        log_t = np.cumsum(log_t)
    p = np.empty(len(s))
    p[0] = p_top
    p[1:] = p_top + np.cumsum(np.exp(log_t))
    np.minimum(p, 1.0, out=p)

    total = float(np.dot(np.exp(log_w), p[::-1]))
    return min(max(total, 0.0), 1.0)
