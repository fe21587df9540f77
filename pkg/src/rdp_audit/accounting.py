"""Conversions between RDP, (epsilon, delta)-DP and Gaussian DP.

The audit estimates a Renyi divergence at one order; claims may arrive in
any of the three languages, so they are translated here before testing.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Union

from scipy import optimize, special

from rdp_audit.exceptions import InfeasibleError

MU_BRACKET = (1e-6, 100.0)


@dataclasses.dataclass(frozen=True)
class RDP:
    alpha: float
    eps_alpha: float

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError(f"RDP order must exceed 1, got {self.alpha}")
        if not self.eps_alpha >= 0:
            raise ValueError(f"eps_alpha must be nonnegative, got {self.eps_alpha}")


@dataclasses.dataclass(frozen=True)
class ApproxDP:
    eps: float
    delta: float

    def __post_init__(self):
        if not self.eps >= 0:
            raise ValueError(f"eps must be nonnegative, got {self.eps}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")


@dataclasses.dataclass(frozen=True)
class GDP:
    mu: float

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")


PrivacyGuarantee = Union[RDP, ApproxDP, GDP]


def normal_cdf(x: float) -> float:
    """Standard normal CDF, ``erfc(-x / sqrt 2) / 2`` (full double precision)."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def rdp_to_approx_dp(g: RDP, delta: float) -> ApproxDP:
    """``(alpha, eps_alpha)``-RDP implies ``(eps_alpha + log(1/delta)/(alpha-1), delta)``-DP."""
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    return ApproxDP(g.eps_alpha + math.log(1.0 / delta) / (g.alpha - 1.0), delta)


def gdp_to_rdp(g: GDP, alpha: float) -> RDP:
    """mu-GDP implies ``(alpha, mu^2 alpha / 2)``-RDP."""
    return RDP(alpha, 0.5 * g.mu**2 * alpha)


def gdp_to_approx_dp_delta(g: GDP, eps: float) -> float:
    """Tight delta(eps) of a mu-GDP mechanism.

    ``Phi(-eps/mu + mu/2) - exp(eps) Phi(-eps/mu - mu/2)``, with both terms
    held in log space so large ``eps`` does not cancel catastrophically.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if g.mu == 0:
        return 0.0
    log_a = float(special.log_ndtr(-eps / g.mu + g.mu / 2.0))
    log_b = eps + float(special.log_ndtr(-eps / g.mu - g.mu / 2.0))
    if log_b >= log_a:
        return 0.0
    return -math.exp(log_a) * math.expm1(log_b - log_a)


def approx_dp_to_gdp(eps: float, delta: float) -> GDP:
    """The mu at which a mu-GDP mechanism's delta(eps) equals ``delta``.

    Solved by bracketing on ``mu`` in [1e-6, 100]; delta(eps) is increasing in mu.

    Raises:
      InfeasibleError: if the root lies outside the bracket.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    lo, hi = MU_BRACKET

    def gap(mu: float) -> float:
        return gdp_to_approx_dp_delta(GDP(mu), eps) - delta

    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo > 0 or g_hi < 0:
        raise InfeasibleError(
            f"no mu in [{lo:g}, {hi:g}] gives delta={delta:g} at eps={eps:g} "
            f"(delta range [{g_lo + delta:.3g}, {g_hi + delta:.3g}])"
        )
    mu = optimize.brentq(gap, lo, hi, xtol=1e-14, maxiter=500)
    return GDP(float(mu))


def group_privacy(g: RDP, c: int) -> RDP:
    """RDP for neighbours at distance ``2**c``: ``(alpha / 2**c, 3**c eps)``.

    Requires ``alpha >= 2**(c+1)``; ``c == 0`` is the identity.
    """
    if int(c) != c or c < 0:
        raise ValueError(f"c must be a nonnegative integer, got {c}")
    c = int(c)
    if c == 0:
        return g
    need = 2.0 ** (c + 1)
    if g.alpha < need:
        raise ValueError(f"group privacy with c={c} requires alpha >= {need:g}, got alpha={g.alpha:g}")
    return RDP(g.alpha / 2**c, 3**c * g.eps_alpha)


def to_rdp(g: PrivacyGuarantee, alpha: float) -> tuple[RDP, list[str]]:
    """Expresses a claim as an RDP guarantee at order ``alpha``.

    RDP claims at a higher order carry over by monotonicity in the order;
    (eps, delta) claims go through the tight GDP curve first.

    Returns:
      The RDP guarantee and the list of conversion steps applied.

    Raises:
      ValueError: if the claim cannot be stated at ``alpha``.
    """
    if isinstance(g, RDP):
        if g.alpha == alpha:
            return g, []
        if g.alpha > alpha:
            return RDP(alpha, g.eps_alpha), [f"rdp monotone in order: ({g.alpha:g}) -> ({alpha:g})"]
        raise ValueError(
            f"an RDP claim at alpha={g.alpha:g} says nothing about the larger audit order {alpha:g}"
        )
    if isinstance(g, GDP):
        return gdp_to_rdp(g, alpha), [f"gdp_to_rdp(mu={g.mu:g}, alpha={alpha:g})"]
    if isinstance(g, ApproxDP):
        if g.delta <= 0 or g.delta >= 1:
            raise ValueError("an (eps, delta) claim needs delta in (0, 1) to convert")
        gdp = approx_dp_to_gdp(g.eps, g.delta)
        return gdp_to_rdp(gdp, alpha), [
            f"approx_dp_to_gdp(eps={g.eps:g}, delta={g.delta:g}) -> mu={gdp.mu:.6g}",
            f"gdp_to_rdp(mu={gdp.mu:.6g}, alpha={alpha:g})",
        ]
    raise TypeError(f"unsupported guarantee {g!r}")


def guarantee_to_dict(g: PrivacyGuarantee) -> dict:
    kind = {RDP: "rdp", ApproxDP: "dp", GDP: "gdp"}[type(g)]
    return {"kind": kind, **dataclasses.asdict(g)}


def parse_guarantee(text: str) -> PrivacyGuarantee:
    """Parses ``rdp:alpha,eps`` | ``gdp:mu`` | ``dp:eps,delta``."""
    kind, _, rest = text.partition(":")
    try:
        parts = [float(v) for v in rest.split(",")] if rest else []
    except ValueError:
        raise ValueError(f"cannot parse numbers in guarantee {text!r}") from None
    kind = kind.strip().lower()
    expected = {"rdp": 2, "gdp": 1, "dp": 2}
    if kind not in expected:
        raise ValueError(f"unknown guarantee kind {kind!r} (use rdp:, gdp: or dp:)")
    if len(parts) != expected[kind]:
        raise ValueError(f"{kind} guarantee takes {expected[kind]} number(s), got {text!r}")
    if kind == "rdp":
        return RDP(*parts)
    if kind == "gdp":
        return GDP(parts[0])
    return ApproxDP(*parts)
