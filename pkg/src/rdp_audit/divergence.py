"""Closed-form and plug-in Renyi divergences.

These serve two purposes: ground truth for testing the variational
estimator, and a density-aware auditing path when the privacy-loss
function ``L(x) = log p(x)/q(x)`` is known.

Infinite divergence is returned as ``math.inf`` rather than raised, so
that callers can report "unbounded" without aborting.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from collections.abc import Callable, Sequence
from typing import Union

import numpy as np
from scipy.special import logsumexp


@dataclasses.dataclass(frozen=True)
class Order:
    """A Renyi order.

    Orders in (0, 1) are accepted because the variational form is defined
    there too, but audits below 1 are unvalidated and a warning is issued.
    """

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not math.isfinite(a) or a <= 0 or a == 1:
            raise ValueError(f"Renyi order must be > 0 and != 1, got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)
        if a < 1:
            warnings.warn(
                f"order alpha={a} < 1: divergence semantics are non-standard",
                stacklevel=3,
            )

    @property
    def is_standard(self) -> bool:
        return self.alpha > 1

    def __float__(self) -> float:
        return self.alpha


OrderLike = Union[Order, float, int]


def as_order(order: OrderLike) -> Order:
    return order if isinstance(order, Order) else Order(float(order))


def require_standard(order: OrderLike) -> float:
    """Returns alpha as float, raising unless alpha > 1."""
    o = as_order(order)
    if not o.is_standard:
        raise ValueError(f"this operation requires alpha > 1, got {o.alpha}")
    return o.alpha


@dataclasses.dataclass(frozen=True)
class SampleSet:
    """Ordered finite scalar observations drawn from one distribution.

    Attributes:
      values: read-only float64 array of observations.
      label: free-form tag, e.g. "canary-in".
    """

    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64).reshape(-1)
        if arr.size < 1:
            raise ValueError("SampleSet must contain at least one value")
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise ValueError(
                f"SampleSet {self.label!r} has non-finite value at index {bad[0]}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    def __iter__(self):
        return iter(self.values)


def as_values(samples: SampleSet | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(samples, SampleSet):
        return samples.values
    return SampleSet(samples).values


LogRatioOracle = Callable[[np.ndarray], np.ndarray]


def renyi_gaussian(mu_p: float, mu_q: float, sigma: float, order: OrderLike) -> float:
    """D_alpha(N(mu_p, sigma^2) || N(mu_q, sigma^2)) = alpha (mu_p-mu_q)^2 / (2 sigma^2)."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    alpha = as_order(order).alpha
    return alpha * (mu_p - mu_q) ** 2 / (2.0 * sigma**2)


def renyi_bernoulli(p: float, q: float, order: OrderLike) -> float:
    """D_alpha(Bern(p) || Bern(q)).

    Returns ``math.inf`` when q is 0 or 1 and p differs from q (and alpha > 1).
    """
    if not 0.0 <= p <= 1.0 or not 0.0 <= q <= 1.0:
        raise ValueError(f"probabilities must lie in [0, 1], got p={p}, q={q}")
    alpha = as_order(order).alpha
    if p == q:
        return 0.0
    terms = []
    for pp, qq in ((p, q), (1.0 - p, 1.0 - q)):
        if pp == 0.0:
            continue
        if qq == 0.0:
            if alpha > 1:
                return math.inf
            continue
        terms.append(alpha * math.log(pp) + (1.0 - alpha) * math.log(qq))
    if not terms:
        return math.inf
    return float(logsumexp(terms)) / (alpha - 1.0)


def plugin_estimate(
    samples_q: SampleSet | Sequence[float],
    oracle: LogRatioOracle,
    order: OrderLike,
) -> tuple[float, float]:
    """Plug-in Renyi estimate from samples of Q and a known log-ratio.

    Args:
      samples_q: draws X_i ~ Q.
      oracle: vectorized map x -> log(p(x)/q(x)).
      order: Renyi order, must exceed 1.

    Returns:
      ``(d_hat, z_hat)`` with ``z_hat = mean(exp(alpha L(X_i)))`` and
      ``d_hat = log(z_hat) / (alpha - 1)``. The mean is formed in log-space;
      ``z_hat`` may overflow to inf even when ``d_hat`` is finite.
    """
    alpha = require_standard(order)
    x = as_values(samples_q)
    log_ratio = np.asarray(oracle(x), dtype=np.float64).reshape(-1)
    if log_ratio.shape != x.shape:
        raise ValueError("oracle must return one log-ratio per sample")
    log_z = float(logsumexp(alpha * log_ratio) - math.log(x.size))
    with np.errstate(over="ignore"):
        z_hat = float(np.exp(log_z))
    return log_z / (alpha - 1.0), z_hat


def renyi_numeric_oracle(
    density_p: Callable[[np.ndarray], np.ndarray],
    density_q: Callable[[np.ndarray], np.ndarray],
    order: OrderLike,
    grid: tuple[float, float, float] | np.ndarray,
) -> float:
    """Brute-force D_alpha(P||Q) by fixed-step trapezoidal quadrature.

    Args:
      density_p, density_q: vectorized nonnegative densities (or masses).
      order: Renyi order.
      grid: ``(lo, hi, step)`` for an evenly spaced grid, or an explicit
        array of support points. An explicit array of fewer than three
        points is treated as a discrete support and summed directly.

    Returns:
      The divergence, or ``math.inf`` when p has mass where q vanishes
      (alpha > 1) or the integral is not finite.
    """
    alpha = as_order(order).alpha
    if isinstance(grid, tuple):
        lo, hi, step = grid
        if not step > 0 or not hi > lo:
            raise ValueError("grid must satisfy hi > lo and step > 0")
        n = int(round((hi - lo) / step)) + 1
        xs = np.linspace(lo, hi, n)
        discrete = False
    else:
        xs = np.asarray(grid, dtype=np.float64)
        discrete = xs.size < 3
    p = np.asarray(density_p(xs), dtype=np.float64)
    q = np.asarray(density_q(xs), dtype=np.float64)
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("densities must be nonnegative")
    if alpha > 1 and np.any((q == 0) & (p > 0)):
        return math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(
            p > 0, np.exp(alpha * np.log(p) + (1.0 - alpha) * np.log(q)), 0.0
        )
    if discrete:
        total = float(np.sum(integrand))
    else:
        total = float(np.trapezoid(integrand, xs))
    if not math.isfinite(total):
        return math.inf
    if total <= 0:
        return math.inf if alpha < 1 else -math.inf
    return math.log(total) / (alpha - 1.0)
