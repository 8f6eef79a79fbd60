import math

import numpy as np
from scipy.special import gammaln, psi

from ICPydags.utils import DomainError

# Above this many factors the log-gamma identities are used instead of explicit sums
_DIRECT_SUM_LIMIT = 64

# Above this j the digamma difference falls back to two digamma calls
_RECURRENCE_LIMIT = 10_000


def _check_count(n) -> int:
    # Factor counts must be nonnegative integers
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise TypeError(f"Expected an integer number of factors, got {type(n)}")
    if n < 0:
        raise DomainError(f"The number of factors must be nonnegative, got {n}.")
    return int(n)


def log_rising_factorial(x: float, n: int) -> float:
    """
    Log of the rising factorial (Pochhammer symbol) x(x+1)...(x+n-1).

    Parameters
    ----------
    x : float
        Base, strictly positive.
    n : int
        Number of factors, nonnegative.

    Returns
    -------
    float
        The sum of log(x + j) for j = 0..n-1; exactly 0.0 when n = 0.

    Raises
    ------
    DomainError
        If x <= 0 or n < 0.

    Examples
    --------
    >>> round(log_rising_factorial(2.0, 3), 6)  # log(2 * 3 * 4)
    3.178054
    """
    n = _check_count(n)
    if not x > 0:
        raise DomainError(f"log_rising_factorial requires x > 0, got {x}.")
    if n == 0:
        return 0.0
    if n <= _DIRECT_SUM_LIMIT:
        return math.fsum(np.log(x + np.arange(n, dtype=float)))
    return float(gammaln(x + n) - gammaln(x))


def log_falling_factorial(x: float, n: int) -> float:
    """
    Log of the falling factorial x(x-1)...(x-n+1).

    Raises
    ------
    DomainError
        If any factor is nonpositive (x - n + 1 <= 0 with n > 0) or n < 0.
    """
    n = _check_count(n)
    if n == 0:
        return 0.0
    if not x - n + 1 > 0:
        raise DomainError(f"log_falling_factorial requires x - n + 1 > 0, got x={x}, n={n}.")
    if n <= _DIRECT_SUM_LIMIT:
        return math.fsum(np.log(x - np.arange(n, dtype=float)))
    return float(gammaln(x + 1) - gammaln(x - n + 1))


def digamma(x: float) -> float:
    """
    Digamma function psi(x) for x > 0.

    Raises
    ------
    DomainError
        If x <= 0.
    """
    if not x > 0:
        raise DomainError(f"digamma requires x > 0, got {x}.")
    return float(psi(x))


def digamma_difference(alpha: float, j: int) -> float:
    """
    psi(alpha + j) - psi(alpha), the weight of the interval above the j-th lowest active node.

    Computed as the exact recurrence sum of 1 / (alpha + t) for t < j while j is small, which avoids
    the cancellation of two large digamma values; two digamma calls are used beyond 10**4 terms.
    """
    j = _check_count(j)
    if not alpha > 0:
        raise DomainError(f"digamma_difference requires alpha > 0, got {alpha}.")
    if j == 0:
        return 0.0
    if j <= _RECURRENCE_LIMIT:
        return math.fsum(1.0 / (alpha + np.arange(j, dtype=float)))
    return digamma(alpha + j) - digamma(alpha)
