"""Confidence bounds, certificates, tests and sample-size planning.

Two families of bounds live here:

* plug-in bounds on ``D_alpha`` built from ``z_hat = mean(exp(alpha L(X)))``
  (Markov lower bound, Hoeffding upper/lower bounds under bounded privacy loss);
* the covering-number radius for the class-restricted variational estimator,
  its certificate, and the planner that inverts it.

Negative lower bounds are returned unchanged; flooring at zero is left to
presentation code.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Literal

from rdp_audit.divergence import OrderLike, as_order, require_standard
from rdp_audit.exceptions import InfeasibleError

Kind = Literal["lower", "upper", "two_sided"]
Method = Literal["markov", "hoeffding_lower", "hoeffding_upper", "dv_covering"]

# Explicit constant in front of the covering radius. The bound fixes it only
# up to O(.); 4 covers the Hoeffding factors collected over the two moments.
DV_CONSTANT_FACTOR = 4.0
# Constant in the Omega(d / eps^2) minimax floor; order-of-magnitude only.
MINIMAX_FLOOR_CONSTANT = 1.0


@dataclasses.dataclass(frozen=True)
class ConfidenceBound:
    """A one- or two-sided confidence statement about a divergence.

    For ``kind == "two_sided"`` both ``lower`` and ``upper`` are set.
    ``inputs`` echoes the arguments that produced the bound.
    """

    kind: Kind
    level: float
    method: Method
    lower: float | None = None
    upper: float | None = None
    inputs: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"confidence level must lie in (0, 1), got {self.level}")
        if self.kind in ("lower", "two_sided") and self.lower is None:
            raise ValueError(f"{self.kind} bound needs a lower value")
        if self.kind in ("upper", "two_sided") and self.upper is None:
            raise ValueError(f"{self.kind} bound needs an upper value")
        if self.kind == "two_sided" and self.lower > self.upper:
            raise ValueError("two-sided bound has lower > upper")

    @property
    def value(self) -> float:
        """The lower value for lower/two-sided bounds, else the upper value."""
        return self.lower if self.lower is not None else self.upper


@dataclasses.dataclass(frozen=True)
class CriticClassSpec:
    """Complexity description of a bounded, Lipschitz critic family.

    ``lipschitz`` is carried for provenance; the radius formula absorbs it
    into the discretization term and does not read it.
    """

    d: int
    K: float
    M: float
    lipschitz: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")
        for name in ("K", "M", "lipschitz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclasses.dataclass(frozen=True)
class AuditDecision:
    """Outcome of testing a claimed ``(alpha, epsilon_null)``-RDP guarantee."""

    reject_null: bool
    epsilon_null: float
    sup_rejectable_epsilon: float
    beta: float
    alpha: float


def _check_beta(beta: float) -> None:
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")


def markov_lower_bound(d_hat: float, order: OrderLike, beta: float) -> ConfidenceBound:
    """Lower bound ``d_hat - log(1/beta)/(alpha-1)`` holding w.p. >= 1 - beta."""
    alpha = require_standard(order)
    _check_beta(beta)
    lower = d_hat - math.log(1.0 / beta) / (alpha - 1.0)
    return ConfidenceBound(
        "lower", 1.0 - beta, "markov", lower=lower, inputs={"d_hat": d_hat, "alpha": alpha, "beta": beta}
    )


def _hoeffding_checks(z_hat: float, n: int, order: OrderLike, beta: float) -> float:
    alpha = require_standard(order)
    _check_beta(beta)
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    if z_hat < 0:
        raise ValueError("z_hat is a mean of nonnegative terms")
    return alpha


def hoeffding_upper_bound(z_hat: float, n: int, B: float, order: OrderLike, beta: float) -> ConfidenceBound:
    """Upper bound on ``D_alpha`` when the privacy loss is bounded above by ``B``.

    ``(1/(alpha-1)) log(z_hat + exp(alpha B) sqrt(log(2/beta) / (2n)))``.
    """
    alpha = _hoeffding_checks(z_hat, n, order, beta)
    slack = math.exp(alpha * B) * math.sqrt(math.log(2.0 / beta) / (2.0 * n))
    upper = math.log(z_hat + slack) / (alpha - 1.0)
    return ConfidenceBound(
        "upper", 1.0 - beta, "hoeffding_upper", upper=upper,
        inputs={"z_hat": z_hat, "n": n, "B": B, "alpha": alpha, "beta": beta},
    )


def hoeffding_lower_bound(z_hat: float, n: int, B: float, order: OrderLike, beta: float) -> ConfidenceBound:
    """One-sided Hoeffding lower bound, floored at zero through ``max{1, .}``."""
    alpha = _hoeffding_checks(z_hat, n, order, beta)
    slack = math.exp(alpha * B) * math.sqrt(math.log(1.0 / beta) / (2.0 * n))
    lower = math.log(max(1.0, z_hat - slack)) / (alpha - 1.0)
    return ConfidenceBound(
        "lower", 1.0 - beta, "hoeffding_lower", lower=lower,
        inputs={"z_hat": z_hat, "n": n, "B": B, "alpha": alpha, "beta": beta},
    )


def dv_constant(order: OrderLike, M: float) -> float:
    """``4 exp(2|alpha| M) max(1/|alpha-1|, 1/|alpha|)``."""
    alpha = as_order(order).alpha
    return DV_CONSTANT_FACTOR * math.exp(2.0 * abs(alpha) * M) * max(1.0 / abs(alpha - 1.0), 1.0 / abs(alpha))


def dv_ci_radius(n: int, spec: CriticClassSpec, order: OrderLike, delta: float, eta: float = 0.0) -> float:
    """Uniform deviation radius of the empirical variational objective.

    Args:
      n: samples per side.
      spec: critic-class complexity (dimension, radius, output bound).
      order: Renyi order.
      delta: failure probability in (0, 1).
      eta: covering scale; 0 selects ``n ** -0.5``.

    Raises:
      ValueError: if ``eta >= K`` (the entropy term would be nonpositive).
    """
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if eta == 0:
        eta = 1.0 / math.sqrt(n)
    if eta >= spec.K:
        raise ValueError(f"covering scale eta={eta:g} must be smaller than K={spec.K:g}")
    c = dv_constant(order, spec.M)
    entropy = spec.d * math.log(spec.K / eta) + math.log(1.0 / delta)
    return c * (math.sqrt(entropy / n) + eta)


def dv_certificate(r_hat: float, radius: float, delta_ci: float = 0.05) -> ConfidenceBound:
    """Interval ``[r_hat - radius, r_hat + radius]`` at level ``1 - delta_ci``.

    ``.lower`` is the certificate's LCB on the class-restricted divergence.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    return ConfidenceBound(
        "two_sided", 1.0 - delta_ci, "dv_covering", lower=r_hat - radius, upper=r_hat + radius,
        inputs={"r_hat": r_hat, "radius": radius, "delta_ci": delta_ci},
    )


def violation_epsilon(lcb: float, order: OrderLike, delta: float) -> float:
    """Smallest epsilon not certified violated: ``lcb + log(1/delta)/(alpha-1)``.

    Any claimed (epsilon, delta)-DP with epsilon below the returned value is
    contradicted at the confidence of the certificate that produced ``lcb``.
    """
    alpha = require_standard(order)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return lcb + math.log(1.0 / delta) / (alpha - 1.0)


def hypothesis_test(d_hat: float, epsilon_null: float, order: OrderLike, beta: float) -> AuditDecision:
    """Markov-region test of ``H0: D_alpha <= epsilon_null``.

    The largest rejectable epsilon is ``d_hat - log(1/beta)/(alpha-1)``; the
    null is rejected iff that exceeds ``epsilon_null``.
    """
    alpha = require_standard(order)
    _check_beta(beta)
    sup_eps = d_hat - math.log(1.0 / beta) / (alpha - 1.0)
    return AuditDecision(
        reject_null=sup_eps > epsilon_null,
        epsilon_null=epsilon_null,
        sup_rejectable_epsilon=sup_eps,
        beta=beta,
        alpha=alpha,
    )


_N_MAX = 10**18


def required_samples(target_eps: float, spec: CriticClassSpec, order: OrderLike, delta: float) -> tuple[int, int]:
    """Sample budget for a covering radius of at most ``target_eps``.

    Returns:
      ``(n_upper, n_floor)``: the smallest ``n`` whose radius (with
      ``eta = n ** -0.5``) is at most ``target_eps``, found by doubling and
      bisection; and the minimax floor ``ceil(d / target_eps**2)`` with the
      unknown constant set to 1.

    Raises:
      InfeasibleError: if no ``n`` up to 1e18 reaches the target.
    """
    if not target_eps > 0:
        raise ValueError("target_eps must be positive")
    n_floor = math.ceil(MINIMAX_FLOOR_CONSTANT * spec.d / target_eps**2)

    def radius(n: int) -> float:
        return dv_ci_radius(n, spec, order, delta, 1.0 / math.sqrt(n))

    # eta = n^-1/2 must stay below K
    lo = max(1, math.floor(1.0 / spec.K**2) + 1)
    if radius(lo) <= target_eps:
        return lo, n_floor
    hi = lo
    while radius(hi) > target_eps:
        lo = hi
        hi *= 2
        if hi > _N_MAX:
            raise InfeasibleError(
                f"radius stays above {target_eps:g} for n up to {_N_MAX:.0e}; "
                f"the output bound M={spec.M:g} makes the constant too large"
            )
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if radius(mid) <= target_eps:
            hi = mid
        else:
            lo = mid
    return hi, n_floor
