# Copyright 2025 John Brosnihan
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""A contrario statistics: binomial tails, NFA, test counts and clamping thresholds.

This module provides:
1. log_binomial_tail / binomial_tail: P[X >= k] for X ~ Binomial(M, p), extended
   to real M and k through the regularized incomplete beta function
2. nfa / is_meaningful: number of false alarms of a bin and the epsilon test
3. n_rect / count_tests: the Bonferroni test count of a histogram grid
4. exact_threshold / solve_exact_threshold: smallest meaningful bin mass
5. approx_threshold / slud_conditions_hold: closed-form threshold and the
   conditions under which the large-deviation bound behind it applies

All arithmetic is done in the log domain: at M ~ 1e4 the tails underflow doubles
long before they reach the thresholds of interest. Every function is pure.
"""

import logging
import math

import numpy as np
from scipy.special import betaln

from siftclamp.exceptions import DomainError
from siftclamp.models.acontrario import (
    AContrarioConfig,
    TailQuery,
    TestCountMode,
    ThresholdResult,
    ThresholdSummary,
)
from siftclamp.models.descriptor import HistogramGrid, RawDescriptor

logger = logging.getLogger(__name__)

# Lentz continued fraction controls
_FPMIN = 1e-300
_CF_EPS = 1e-15
_CF_MAX_ITER = 10_000

# Probabilities within this relative distance of the budget count as "not below" it,
# so rational ties such as 2 * 0.5 == 1 are decided the same way as exact arithmetic.
LOG_TIE_TOLERANCE = 1e-12


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction of the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    logger.debug(
        "Incomplete beta continued fraction hit the iteration cap",
        extra={"a": a, "b": b, "x": x, "max_iter": _CF_MAX_ITER},
    )
    return h


def log_regularized_beta(a: float, b: float, x: float) -> float:
    """Natural log of the regularized incomplete beta function I_x(a, b).

    Args:
        a: First shape parameter, > 0
        b: Second shape parameter, > 0
        x: Evaluation point in [0, 1]

    Returns:
        ln I_x(a, b), in [-inf, 0]
    """
    if a <= 0 or b <= 0:
        raise DomainError(f"beta shape parameters must be positive, got a={a}, b={b}")
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return -math.inf
    if x == 1.0:
        return 0.0
    log_front = a * math.log(x) + b * math.log1p(-x) - float(betaln(a, b))
    if x < (a + 1.0) / (a + b + 2.0):
        return log_front + math.log(_betacf(a, b, x)) - math.log(a)
    complement = math.exp(log_front + math.log(_betacf(b, a, 1.0 - x)) - math.log(b))
    # complement < 1 on this branch; guard rounding at the boundary
    return math.log1p(-min(complement, 1.0 - 1e-16))


def _log_tail(mass: float, k: float, p: float) -> float:
    if k <= 0:
        return 0.0
    return log_regularized_beta(k, mass - k + 1.0, p)


def _log_head(mass: float, k: float, p: float) -> float:
    """ln P[X < k], evaluated directly rather than as 1 - P[X >= k]."""
    if k <= 0:
        return -math.inf
    return log_regularized_beta(mass - k + 1.0, k, 1.0 - p)


def _below_budget(mass: float, k: float, p: float, log_budget: float) -> bool:
    """Whether P[X >= k] < budget, with log_budget = ln(epsilon / tests).

    Budgets of one half or more are decided on P[X < k] > 1 - budget: there the tail
    sits near 1, where its logarithm rounds to 0 and would hide every crossing.
    """
    if log_budget > 0.0:
        return True
    if log_budget >= -math.log(2.0):
        budget = math.exp(log_budget)
        log_floor = -math.inf if budget >= 1.0 else math.log1p(-budget)
        return _log_head(mass, k, p) > log_floor + LOG_TIE_TOLERANCE
    return _log_tail(mass, k, p) < log_budget - LOG_TIE_TOLERANCE


def _check_probability(p: float) -> None:
    if not (0.0 < p < 1.0):
        raise DomainError(f"p must lie in (0, 1), got {p}")


def _check_tests(tests: float) -> None:
    if not tests >= 1:
        raise DomainError(f"the number of tests must be >= 1, got {tests}")


def log_binomial_tail(query: TailQuery) -> float:
    """ln P[X >= k] for X ~ Binomial(M, p); the pmf sum at integers, beta continuation between."""
    query.check_domain()
    return _log_tail(query.mass, query.k, query.p)


def binomial_tail(query: TailQuery) -> float:
    """P[X >= k] for X ~ Binomial(M, p).

    Raises:
        DomainError: If p is outside (0, 1), an argument is negative or k > M
    """
    return min(1.0, math.exp(log_binomial_tail(query)))


def log_nfa(tests: float, query: TailQuery) -> float:
    """ln(tests * P[X >= k])."""
    _check_tests(tests)
    return math.log(tests) + log_binomial_tail(query)


def nfa(cfg: AContrarioConfig, grid_tests: float, query: TailQuery) -> float:
    """Number of false alarms of a bin: grid_tests times its binomial tail.

    The bin is epsilon-meaningful iff the result is below cfg.epsilon; see is_meaningful.
    """
    del cfg  # the NFA itself does not depend on the budget
    return math.exp(log_nfa(grid_tests, query))


def is_meaningful(cfg: AContrarioConfig, grid_tests: float, query: TailQuery) -> bool:
    """True iff NFA < epsilon, decided in the log domain."""
    _check_tests(grid_tests)
    query.check_domain()
    log_budget = math.log(cfg.epsilon) - math.log(grid_tests)
    return _below_budget(query.mass, query.k, query.p, log_budget)


def n_rect(grid: HistogramGrid) -> int:
    """Number of axis-aligned rectangular sub-regions of the grid.

    (1/8) n_x n_y n_theta (n_x + 1)(n_y + 1)(n_theta + 1); every n(n + 1) is even,
    so the division is exact.
    """
    product = 1
    for n in (grid.n_x, grid.n_y, grid.n_theta):
        if n < 1:
            raise DomainError(f"grid dimensions must be >= 1, got {grid.label}")
        product *= n * (n + 1)
    if product % 8:
        raise DomainError(f"rectangle count of grid {grid.label} is not an integer")
    return product // 8


def count_tests(cfg: AContrarioConfig, grid: HistogramGrid) -> float:
    """Number of tests used for the NFA of bins of this grid."""
    if cfg.test_count_mode == TestCountMode.EXPLICIT:
        return float(cfg.explicit_tests)  # type: ignore[arg-type]
    return float(n_rect(grid))


def solve_exact_threshold(
    cfg: AContrarioConfig, tests: float, mass: float, p: float
) -> ThresholdResult:
    """Smallest integer k with tests * P[X >= k] < epsilon, and whether none exists.

    The tail is non-increasing in k, so the predicate is monotone and bisection
    over the integers [0, floor(M)] finds the boundary. The bracket starts at 0
    rather than ceil(M p): when epsilon / tests >= 1/2 the threshold can fall below
    the mean. If even floor(M) is not meaningful the search saturates and returns
    ceil(M), which no bin can exceed.
    """
    _check_tests(tests)
    _check_probability(p)
    if not (mass >= 0 and math.isfinite(mass)):
        raise DomainError(f"mass must be finite and nonnegative, got {mass}")

    log_budget = math.log(cfg.epsilon) - math.log(tests)

    def meaningful(k: int) -> bool:
        return _below_budget(mass, float(k), p, log_budget)

    hi = math.floor(mass)
    if not meaningful(hi):
        logger.debug(
            "Exact threshold saturated: no bin mass is meaningful",
            extra={"mass": mass, "tests": tests, "p": p, "threshold": math.ceil(mass)},
        )
        return ThresholdResult(value=math.ceil(mass), saturated=True)
    if meaningful(0):
        return ThresholdResult(value=0)

    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if meaningful(mid):
            hi = mid
        else:
            lo = mid
    return ThresholdResult(value=hi)


def exact_threshold(cfg: AContrarioConfig, tests: float, mass: float, p: float) -> int:
    """Exact meaningful-clamping threshold min{k : tests * P[X >= k] < epsilon}."""
    return solve_exact_threshold(cfg, tests, mass, p).value


def approx_threshold(tests: float, mass: float, p: float) -> float:
    """Closed-form threshold M p + alpha sqrt(M p (1 - p)) with alpha = sqrt(ln tests).

    Raises:
        DomainError: If tests < 1, p is outside (0, 1) or mass is negative
    """
    _check_tests(tests)
    _check_probability(p)
    if mass < 0:
        raise DomainError(f"mass must be nonnegative, got {mass}")
    alpha = math.sqrt(math.log(tests))
    mean = mass * p
    return mean + alpha * math.sqrt(mean * (1.0 - p))


def alpha(tests: float) -> float:
    """Deviation multiplier sqrt(-ln(1/tests)) of the closed-form threshold."""
    _check_tests(tests)
    return math.sqrt(math.log(tests))


def slud_conditions_hold(p: float, r: float) -> bool:
    """Whether the binomial large-deviation bound applies at rate r = k/M.

    True iff (a) p <= 1/4 and p <= r, or (b) p <= r <= 1 - p.
    """
    return (p <= 0.25 and p <= r) or (p <= r <= 1.0 - p)


def meaningful_bins(
    raw: RawDescriptor, cfg: AContrarioConfig, grid: HistogramGrid
) -> np.ndarray:
    """Boolean mask of the epsilon-meaningful bins of a raw descriptor."""
    if raw.bin_count != grid.bin_count:
        raise DomainError(
            f"descriptor has {raw.bin_count} bins but grid {grid.label} has {grid.bin_count}"
        )
    mask = np.zeros(raw.bin_count, dtype=bool)
    if raw.mass == 0:
        return mask
    tests = count_tests(cfg, grid)
    log_budget = math.log(cfg.epsilon) - math.log(tests)
    for index, value in enumerate(raw.bins):
        k = min(float(value), raw.mass)
        mask[index] = _below_budget(raw.mass, k, raw.bin_probability, log_budget)
    return mask


def threshold_summary(
    cfg: AContrarioConfig, grid: HistogramGrid, mass: float, bins: int | None = None
) -> ThresholdSummary:
    """Both thresholds, alpha, the test count and the large-deviation flags for one mass.

    Args:
        cfg: Detection budget and test-count selection
        grid: Grid the test count is derived from
        mass: Total descriptor mass M
        bins: Number of bins L (default: the grid's bin count)
    """
    bin_count = grid.bin_count if bins is None else bins
    if bin_count < 2:
        raise DomainError(f"a histogram needs at least 2 bins, got {bin_count}")
    p = 1.0 / bin_count
    tests = count_tests(cfg, grid)
    exact = solve_exact_threshold(cfg, tests, mass, p)
    approx = approx_threshold(tests, mass, p)
    return ThresholdSummary(
        mass=mass,
        bins=bin_count,
        p=p,
        grid=grid.label,
        tests=tests,
        epsilon=cfg.epsilon,
        alpha=alpha(tests),
        exact=exact.value,
        saturated=exact.saturated,
        approx=approx,
        slud_exact=mass > 0 and slud_conditions_hold(p, min(1.0, exact.value / mass)),
        slud_approx=mass > 0 and slud_conditions_hold(p, min(1.0, approx / mass)),
    )
