"""The hard instance behind the Omega(d / eps^2) sample-complexity floor.

Hidden balanced sign vectors ``u`` index distributions
``Q_u(i) = (1 + delta u_i) / d`` on ``{1..d}`` against a uniform ``P``, and
critics ``T_v(i) = tau v_i``. This module builds the packing, evaluates the
population variational objective in closed form and by direct summation,
computes the KL divergence between hypotheses and the separation gap, and
checks every invariant the lower-bound argument relies on.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from rdp_audit.divergence import OrderLike, as_order
from rdp_audit.exceptions import ConstructionError, InfeasibleError

DEFAULT_TAU = 0.5
DELTA_MAX = 0.5


@dataclasses.dataclass(frozen=True)
class Packing:
    """Balanced +-1 codewords (rows) with pairwise Hamming distance in [d/4, 3d/4]."""

    d: int
    codewords: np.ndarray
    attempts: int

    def __len__(self) -> int:
        return self.codewords.shape[0]


@dataclasses.dataclass(frozen=True)
class PackingInstance:
    packing: Packing
    delta: float
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if not 0.0 <= self.delta <= DELTA_MAX:
            raise InfeasibleError(f"delta must lie in [0, 1/2], got {self.delta:g}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau:g}")

    @property
    def d(self) -> int:
        return self.packing.d


def hamming(u, v) -> int:
    return int(np.count_nonzero(np.asarray(u) != np.asarray(v)))


def correlation(u, v) -> float:
    """``rho(u, v) = (1/d) sum u_i v_i``."""
    u, v = np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)
    return float(u @ v) / u.size


def _check_balanced(u) -> np.ndarray:
    u = np.asarray(u)
    if u.ndim != 1 or not np.all(np.abs(u) == 1):
        raise ValueError("codewords must be +-1 vectors")
    if int(u.sum()) != 0:
        raise ValueError("codeword is not balanced (entries must sum to 0)")
    return u


def build_balanced_packing(d: int, target_count: int, seed: int, max_stall: int | None = None) -> Packing:
    """Greedy randomized packing in the middle slice of the hypercube.

    Random balanced vectors are drawn and kept when their Hamming distance to
    every kept vector lies in ``[d/4, 3d/4]``. Stops at ``target_count`` or
    after ``max_stall`` consecutive rejections (default ``50 * target_count
    + 1000``).

    Raises:
      ConstructionError: if fewer than two codewords were found.
    """
    if d % 2 or d < 8:
        raise ValueError(f"d must be even and at least 8, got {d}")
    if target_count < 2:
        raise ValueError("target_count must be at least 2")
    if max_stall is None:
        max_stall = 50 * target_count + 1000
    rng = np.random.default_rng(seed)
    base = np.repeat(np.array([1, -1], dtype=np.int8), d // 2)
    lo, hi = d / 4, 3 * d / 4
    kept: list[np.ndarray] = []
    stall = attempts = 0
    while len(kept) < target_count and stall < max_stall:
        cand = rng.permutation(base)
        attempts += 1
        if kept:
            dist = np.count_nonzero(np.asarray(kept) != cand, axis=1)
            ok = bool(np.all((dist >= lo) & (dist <= hi)))
        else:
            ok = True
        if ok:
            kept.append(cand)
            stall = 0
        else:
            stall += 1
    if len(kept) < 2:
        raise ConstructionError(f"packing stalled with {len(kept)} codeword(s) after {attempts} draws", attempts)
    return Packing(d, np.asarray(kept), attempts)


def _a_b(alpha: float, tau: float) -> tuple[float, float]:
    return (alpha - 1.0) * tau, alpha * tau


def population_dv_value(u, v, alpha: OrderLike, tau: float, delta: float) -> float:
    """Closed-form ``V_{P,Q_u}(theta^v)``.

    ``(1/(alpha-1)) log(cosh a + delta sinh(a) rho(u,v)) - (1/alpha) log cosh b``
    with ``a = (alpha-1) tau`` and ``b = alpha tau``.
    """
    alpha = as_order(alpha).alpha
    u, v = _check_balanced(u), _check_balanced(v)
    a, b = _a_b(alpha, tau)
    arg = math.cosh(a) + delta * math.sinh(a) * correlation(u, v)
    if not arg > 0:
        raise ArithmeticError(f"log argument {arg:g} is not positive")
    return math.log(arg) / (alpha - 1.0) - math.log(math.cosh(b)) / alpha


def q_distribution(u, delta: float) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    return (1.0 + delta * u) / u.size


def direct_dv_value(u, v, alpha: OrderLike, tau: float, delta: float) -> float:
    """``V_{P,Q_u}(theta^v)`` by summing over the ``d`` outcomes."""
    alpha = as_order(alpha).alpha
    q = q_distribution(u, delta)
    t = tau * np.asarray(v, dtype=np.float64)
    p = np.full(t.size, 1.0 / t.size)
    return math.log(float(np.sum(q * np.exp((alpha - 1.0) * t)))) / (alpha - 1.0) - math.log(
        float(np.sum(p * np.exp(alpha * t)))
    ) / alpha


def hypothesis_kl(u, v, delta: float, d: int | None = None) -> float:
    """``KL(Q_u || Q_v) = (2 m delta / d) log((1+delta)/(1-delta))`` with ``m = d_H / 2``."""
    u, v = _check_balanced(u), _check_balanced(v)
    if u.size != v.size or (d is not None and d != u.size):
        raise ValueError("codewords must have the same length d")
    if not 0.0 <= delta < 1.0:
        raise ValueError("delta must lie in [0, 1)")
    m = hamming(u, v) / 2
    return 2.0 * m * delta / u.size * math.log((1.0 + delta) / (1.0 - delta))


def direct_kl(u, v, delta: float) -> float:
    qu, qv = q_distribution(u, delta), q_distribution(v, delta)
    return float(np.sum(qu * np.log(qu / qv)))


def _f(r, alpha: float, tau: float, delta: float):
    a, _ = _a_b(alpha, tau)
    return np.log(np.cosh(a) + delta * np.sinh(a) * np.asarray(r)) / (alpha - 1.0)


def _f_prime(r, alpha: float, tau: float, delta: float):
    a, _ = _a_b(alpha, tau)
    return delta * np.sinh(a) / ((alpha - 1.0) * (np.cosh(a) + delta * np.sinh(a) * np.asarray(r)))


def separation_gap(alpha: OrderLike, tau: float, delta: float) -> float:
    """``F(1) - F(1/2)``; strictly positive whenever ``delta > 0``."""
    alpha = as_order(alpha).alpha
    if not 0.0 <= delta <= DELTA_MAX:
        raise InfeasibleError(f"delta must lie in [0, 1/2], got {delta:g}")
    gap = float(_f(1.0, alpha, tau, delta) - _f(0.5, alpha, tau, delta))
    if delta > 0 and not gap > 0:
        raise ArithmeticError(f"separation gap {gap:g} is not positive")
    return gap


def c_alpha(alpha: OrderLike, tau: float = DEFAULT_TAU, delta: float = DELTA_MAX, grid: int = 2001) -> float:
    """``min over r in [-1, 1] of F'(r) / delta``, evaluated on a grid.

    With the default ``delta = 1/2`` the value is a lower bound valid for
    every smaller ``delta``, which is what the planner needs.
    """
    alpha = as_order(alpha).alpha
    if not 0.0 < delta <= DELTA_MAX:
        raise ValueError("delta must lie in (0, 1/2]")
    r = np.linspace(-1.0, 1.0, grid)
    return float(np.min(_f_prime(r, alpha, tau, delta)) / delta)


def check_instance(instance: PackingInstance, alpha: OrderLike, tol: float = 1e-12) -> dict:
    """Evaluates every invariant of the construction on all codeword pairs.

    Returns:
      A dict with one boolean per invariant under ``"checks"`` and the
      measured quantities (max errors, gap, margin, KL range).
    """
    alpha = as_order(alpha).alpha
    U = instance.packing.codewords
    d, tau, delta = instance.d, instance.tau, instance.delta
    k = U.shape[0]
    vals = np.empty((k, k))
    dv_err = kl_err = 0.0
    kls = []
    lipschitz_ok = True
    for i in range(k):
        for j in range(k):
            closed = population_dv_value(U[i], U[j], alpha, tau, delta)
            vals[i, j] = closed
            dv_err = max(dv_err, abs(closed - direct_dv_value(U[i], U[j], alpha, tau, delta)))
            kl = hypothesis_kl(U[i], U[j], delta, d)
            kl_err = max(kl_err, abs(kl - direct_kl(U[i], U[j], delta)))
            if i != j:
                kls.append(kl)
                t_gap = tau * float(np.max(np.abs(U[i] - U[j])))
                theta_dist = float(np.linalg.norm((U[i] - U[j]) / math.sqrt(d)))
                lipschitz_ok &= t_gap <= 2.0 * tau * theta_dist + tol
    dist = [hamming(U[i], U[j]) for i in range(k) for j in range(i + 1, k)]
    rho = [correlation(U[i], U[j]) for i in range(k) for j in range(i + 1, k)]
    qs = [q_distribution(u, delta) for u in U]
    gap = separation_gap(alpha, tau, delta)
    margin = min(vals[i, i] - max(vals[i, j] for j in range(k) if j != i) for i in range(k))
    ca = c_alpha(alpha, tau, delta) if delta > 0 else float("nan")
    checks = {
        "balanced": bool(np.all(U.sum(axis=1) == 0)),
        "distance_window": bool(all(d / 4 <= x <= 3 * d / 4 for x in dist)),
        "correlation_at_most_half": bool(all(r <= 0.5 + tol for r in rho)),
        "q_valid": bool(all(abs(q.sum() - 1.0) <= tol and np.all(q > 0) for q in qs)),
        "closed_form_matches_sum": dv_err <= tol,
        "kl_formula_matches_sum": kl_err <= tol,
        "gap_positive": gap > 0 if delta > 0 else gap == 0,
        "gap_at_least_c_alpha_delta_half": (gap >= ca * delta / 2 - tol) if delta > 0 else True,
        "decoding_separation": bool(margin >= gap - tol),
        "lipschitz_witness": bool(lipschitz_ok),
    }
    return {
        "checks": checks,
        "all_pass": all(checks.values()),
        "codewords": k,
        "max_dv_error": dv_err,
        "max_kl_error": kl_err,
        "separation_gap": gap,
        "decoding_margin": float(margin),
        "c_alpha": ca,
        "kl_min": min(kls),
        "kl_max": max(kls),
    }


def planner_consistency_check(
    d: int,
    epsilon: float,
    alpha: OrderLike = 2.0,
    tau: float = DEFAULT_TAU,
    n: int | None = None,
    seed: int = 0,
    target_count: int = 64,
) -> dict:
    """Assembles the hard instance for accuracy ``epsilon`` and evaluates Fano's condition.

    Sets ``delta = 8 epsilon / c_alpha`` (with ``c_alpha`` at ``delta = 1/2``),
    builds a packing, and reports the packing log-size, the largest pairwise
    KL, the mutual-information bound ``n * KL_max`` and the Fano threshold
    ``c_GV d / 2``. Constants are taken as 1: the floor ``d / eps^2`` is an
    order-of-magnitude statement. ``n`` defaults to that floor.

    The Gilbert-Varshamov threshold assumes an exponentially large packing.
    The greedy packing actually built is smaller, so the report also gives
    the threshold ``log|U| / 2`` of the constructed set and whether Fano's
    bound binds for it.

    Raises:
      InfeasibleError: if ``delta`` would exceed 1/2.
    """
    alpha = as_order(alpha).alpha
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    ca = c_alpha(alpha, tau)
    delta = 8.0 * epsilon / ca
    if delta > DELTA_MAX:
        raise InfeasibleError(
            f"epsilon={epsilon:g} needs delta={delta:.4g} > 1/2; use epsilon <= {ca * DELTA_MAX / 8:.4g}"
        )
    d_eff = d if d % 2 == 0 else d - 1
    packing = build_balanced_packing(d_eff, target_count, seed)
    U = packing.codewords
    kl_max = max(hypothesis_kl(U[i], U[j], delta) for i in range(len(U)) for j in range(len(U)) if i != j)
    n_floor = math.ceil(d / epsilon**2)
    n_eval = n_floor if n is None else int(n)
    log_size = math.log(len(U))
    mi_bound = n_eval * kl_max
    fano_threshold = 0.5 * d_eff
    packing_threshold = 0.5 * log_size
    return {
        "d": d,
        "d_effective": d_eff,
        "epsilon": epsilon,
        "alpha": alpha,
        "tau": tau,
        "c_alpha": ca,
        "delta": delta,
        "packing_size": len(U),
        "packing_log_size": log_size,
        "kl_max": kl_max,
        "n": n_eval,
        "n_floor": n_floor,
        "mutual_information_bound": mi_bound,
        "fano_threshold": fano_threshold,
        "fano_binding": mi_bound + math.log(2.0) <= fano_threshold,
        "n_fano_max": max(0.0, (fano_threshold - math.log(2.0)) / kl_max),
        "fano_threshold_packing": packing_threshold,
        "fano_binding_packing": mi_bound + math.log(2.0) <= packing_threshold,
        "constants": "c = c_GV = 1 (order of magnitude only)",
    }
