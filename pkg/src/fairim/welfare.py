"""Unbiased estimation of fractional powers of community utilities.

The welfare objective sums ``n_c * u_c**alpha`` over communities, with
``u_c`` the expected activated fraction of community ``c`` and
``alpha in (0,1)`` the inequality-aversion exponent.  Taking the sample
mean of ``u_c`` and raising it to ``alpha`` is biased (Jensen), so the
fractional power is expanded as a binomial series

    u**alpha = 1 - alpha * sum_{n>=1} eta(n, alpha) * (1-u)**n

and each integral power ``(1-u)**n`` is estimated without bias from 0/1
coverage indicators via falling-factorial ratios.  All products are
evaluated term-by-term in ratio form so the counts may be arbitrarily
large without overflow.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "eta",
    "eta_coefficients",
    "EstimatorConfig",
    "truncated_power",
    "truncation_tail",
    "unbiased_mean_power",
    "unbiased_mean_power_bruteforce",
    "CommunityCoverage",
    "fair_influence_estimate",
    "marginal_gain",
    "marginal_gain_batch",
]


def eta(n: int, alpha: float) -> float:
    """Binomial-series coefficient: 1 for n=1, else (1-a)(2-a)...(n-1-a)/n!.

    Computed by the stable recurrence ``eta(n+1) = eta(n) * (n-a)/(n+1)``;
    for ``alpha in (0,1)`` the coefficients are positive and strictly
    decreasing, and ``alpha * sum_n eta(n, alpha)`` sums to 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0,1)")
    val = 1.0
    for j in range(1, n):
        val *= (j - alpha) / (j + 1)
    return val


def eta_coefficients(order: int, alpha: float) -> np.ndarray:
    """Coefficients ``eta(1..order, alpha)`` as a contiguous array."""
    if order < 1:
        raise ValueError("order must be >= 1")
    out = np.empty(order, dtype=np.float64)
    out[0] = 1.0
    for j in range(1, order):
        out[j] = out[j - 1] * (j - alpha) / (j + 1)
    return out


@dataclass(frozen=True)
class EstimatorConfig:
    """Inequality aversion ``alpha`` plus series truncation order.

    ``order`` (the number of series terms kept, >= 2) trades truncation
    bias against the RR-sample size, which grows with ``order**2``.  The
    truncation error at utility ``u`` is at most ``(1-u)**(order+1) / u``.
    """

    alpha: float
    order: int = 10
    coefficients: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0,1)")
        if self.order < 2:
            raise ValueError("truncation order must be >= 2")
        coeffs = eta_coefficients(self.order, self.alpha)
        coeffs.flags.writeable = False
        object.__setattr__(self, "coefficients", coeffs)


def truncated_power(u: float, config: EstimatorConfig) -> float:
    """Series approximation of ``u**alpha`` truncated at ``config.order``.

    Always an over-approximation: the dropped terms are positive.
    """
    if not (0.0 <= u <= 1.0):
        raise ValueError("u must lie in [0,1]")
    x = 1.0 - u
    s = 0.0
    pw = 1.0
    for c in config.coefficients:
        pw *= x
        s += c * pw
    return 1.0 - config.alpha * s


def truncation_tail(u: float, config: EstimatorConfig, max_terms: int = 200_000) -> float:
    """Exact truncation error ``truncated_power(u) - u**alpha`` as a series.

    Evaluates ``alpha * sum_{n>order} eta(n,alpha) * (1-u)**n`` directly,
    which is numerically robust (all terms positive, no cancellation) even
    when the tail is far below float-subtraction noise.
    """
    if not (0.0 < u <= 1.0):
        raise ValueError("u must lie in (0,1] for a convergent tail")
    x = 1.0 - u
    q = config.order
    e = eta(q, config.alpha) * (q - config.alpha) / (q + 1)   # eta(q+1)
    pw = x ** (q + 1)
    s = 0.0
    n = q + 1
    for _ in range(max_terms):
        term = e * pw
        s += term
        if term <= s * 1e-18:
            break
        e *= (n - config.alpha) / (n + 1)
        pw *= x
        n += 1
    return config.alpha * s


def unbiased_mean_power(sample: Sequence[float], n: int) -> float:
    """Unbiased estimate of ``mean**n`` from a with-replacement sample.

    For 0/1 samples with ``k`` ones this is the falling-factorial ratio
    ``k(k-1)...(k-n+1) / (m(m-1)...(m-n+1))``; general samples fall back
    to the permutation sum (small ``m`` only).
    """
    x = np.asarray(sample, dtype=np.float64)
    m = x.size
    if not 1 <= n <= m:
        raise ValueError(f"need 1 <= n <= sample size, got n={n}, m={m}")
    if np.isin(x, (0.0, 1.0)).all():
        k = float(x.sum())
        val = 1.0
        for i in range(n):
            if k - i <= 0.0:
                return 0.0
            val *= (k - i) / (m - i)
        return val
    return unbiased_mean_power_bruteforce(x, n)


def unbiased_mean_power_bruteforce(sample: Sequence[float], n: int) -> float:
    """Permutation-sum form: average of ``x_{i1}*...*x_{in}`` over all
    ordered tuples of distinct indices.  Exponential in ``n``; test oracle."""
    x = np.asarray(sample, dtype=np.float64)
    m = x.size
    if not 1 <= n <= m:
        raise ValueError(f"need 1 <= n <= sample size, got n={n}, m={m}")
    if math.perm(m, n) > 5_000_000:
        raise ValueError("permutation sum too large; use the binary fast path")
    total = 0.0
    for idx in itertools.permutations(range(m), n):
        prod = 1.0
        for i in idx:
            prod *= x[i]
            if prod == 0.0:
                break
        total += prod
    return total / math.perm(m, n)


@dataclass(frozen=True)
class CommunityCoverage:
    """Per-community RR-set tallies: size, sample count, uncovered count."""

    sizes: np.ndarray       # n_c, community member counts
    rr_counts: np.ndarray   # theta_c, RR sets rooted in the community
    uncovered: np.ndarray   # pi_c, rooted RR sets not covered by the seeds

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=np.int64)
        rr = np.asarray(self.rr_counts, dtype=np.int64)
        unc = np.asarray(self.uncovered, dtype=np.int64)
        if not (sizes.shape == rr.shape == unc.shape):
            raise ValueError("per-community arrays must be parallel")
        if (unc < 0).any() or (unc > rr).any():
            raise ValueError("uncovered counts must lie in [0, rr_counts]")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "rr_counts", rr)
        object.__setattr__(self, "uncovered", unc)


def _series_sum(uncovered: np.ndarray, rr_counts: np.ndarray,
                coefficients: np.ndarray) -> np.ndarray:
    """``sum_n eta_n * prod_{i<n} (pi-i)/(theta-i)`` per community.

    Factors are clamped at zero, so once a product hits zero it stays
    zero for all higher terms.
    """
    pi = uncovered.astype(np.float64)
    theta = rr_counts.astype(np.float64)
    prod = np.ones_like(pi)
    acc = np.zeros_like(pi)
    for i, c in enumerate(coefficients):
        prod = prod * (np.maximum(pi - i, 0.0) / (theta - i))
        acc = acc + c * prod
    return acc


def fair_influence_estimate(coverage: CommunityCoverage, config: EstimatorConfig) -> float:
    """Welfare-fair influence estimated from community-wise RR coverage.

    ``sum_c n_c * (1 - alpha * sum_n eta_n * prod_{i<n} (pi_c-i)/(theta_c-i))``,
    an unbiased estimator of ``sum_c n_c * u_c**alpha`` up to the series
    truncation.  Requires ``theta_c >= order`` so every denominator stays
    positive.
    """
    if (coverage.rr_counts < config.order).any():
        raise ValueError("every community needs at least `order` RR sets")
    inner = _series_sum(coverage.uncovered, coverage.rr_counts, config.coefficients)
    return float(np.sum(coverage.sizes * (1.0 - config.alpha * inner)))


def marginal_gain_batch(extra: np.ndarray, covered: np.ndarray,
                        rr_counts: np.ndarray, sizes: np.ndarray,
                        config: EstimatorConfig) -> np.ndarray:
    """Estimator gain of adding one node, for a batch of candidate nodes.

    ``extra[b, c]`` counts the c-rooted RR sets newly covered by candidate
    ``b`` on top of the current seeds (which cover ``covered[c]``).  Row
    ``b`` of the result equals the estimate after committing ``b`` minus
    the estimate before, with both sides truncated at the same order.
    """
    covered = np.asarray(covered, dtype=np.float64)
    theta = np.asarray(rr_counts, dtype=np.float64)
    extra = np.atleast_2d(np.asarray(extra, dtype=np.float64))
    if (covered < 0).any() or (covered > theta).any():
        raise ValueError("covered counts must lie in [0, rr_counts]")
    if (extra < 0).any() or (extra > (theta - covered)[None, :]).any():
        raise ValueError("extra coverage cannot exceed the uncovered count")
    before = theta - covered              # (C,)
    after = before[None, :] - extra       # (B, C)
    prod_b = np.ones_like(before)
    prod_a = np.ones_like(after)
    acc = np.zeros_like(after)
    for i, c in enumerate(config.coefficients):
        prod_b = prod_b * (np.maximum(before - i, 0.0) / (theta - i))
        prod_a = prod_a * (np.maximum(after - i, 0.0) / (theta - i)[None, :])
        acc = acc + c * (prod_b[None, :] - prod_a)
    return config.alpha * (acc * np.asarray(sizes, dtype=np.float64)[None, :]).sum(axis=1)


def marginal_gain(rr_counts: np.ndarray, covered: np.ndarray, extra: np.ndarray,
                  sizes: np.ndarray, config: EstimatorConfig) -> float:
    """Scalar form of :func:`marginal_gain_batch` for a single candidate."""
    extra = np.asarray(extra, dtype=np.float64)
    return float(marginal_gain_batch(extra[None, :], covered, rr_counts, sizes, config)[0])
