"""Closed-form asymptotic ADD bounds (small-alpha limits).

All quantities are in slots.  ``kl`` is D(f1 || f0), ``rho`` the geometric
hazard, ``g_star`` / ``zeta`` mean sampling intervals (>= 1) supplied by the
caller.
"""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BoundParams:
    alpha: float
    rho: float
    kl: float
    K: int = 1
    g_star: float = 1.0
    zeta: float = 1.0
    eta: float = 0.1

    def __post_init__(self):
        for name in ("alpha", "rho", "eta"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.kl < 0:
            raise ValueError(f"kl must be nonnegative, got {self.kl}")
        if self.K < 1:
            raise ValueError(f"K must be positive, got {self.K}")
        if self.g_star < 1 or self.zeta < 1:
            raise ValueError("g_star and zeta must be >= 1")


def _prior_rate(rho):
    return abs(math.log1p(-rho))


def seq_term(K):
    """log K - log(K!) / K, via log-gamma; increases from 0 towards 1."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return math.log(K) - math.lgamma(K + 1) / K


def add_lower_bound(alpha, kl, rho):
    return abs(math.log(alpha)) / (kl + _prior_rate(rho))


def smap_upper_bound(alpha, rho, K):
    return (seq_term(K) + abs(math.log(alpha))) / _prior_rate(rho)


def smap_upper_bound_limit(alpha, rho):
    """K -> infinity limit of ``smap_upper_bound``."""
    return (1.0 + abs(math.log(alpha))) / _prior_rate(rho)


def ismap_upper_bound(alpha, rho):
    return abs(math.log(alpha)) / _prior_rate(rho)


def gstar_upper_bounds(alpha, rho, kl, g_star, K):
    """(S-MAP, IS-MAP) upper bounds with worst-case mean sampling interval g*."""
    if g_star < 1:
        raise ValueError(f"g_star must be >= 1, got {g_star}")
    den = kl / g_star + _prior_rate(rho)
    la = abs(math.log(alpha))
    return (seq_term(K) + la) / den, la / den


def prop1_upper_bound(eta, rho, kl, zeta):
    """Single-stream bound for a stopping rule observing every zeta-th slot on average."""
    if zeta < 1:
        raise ValueError(f"zeta must be >= 1, got {zeta}")
    return abs(math.log(eta)) / (kl / zeta + _prior_rate(rho))


def ratio_limit(alpha):
    """Limit of the IS-MAP / S-MAP upper-bound ratio as K grows."""
    la = abs(math.log(alpha))
    return la / (1.0 + la)


def all_bounds(p):
    """Every bound for one parameter set, keyed by column name."""
    s_g, i_g = gstar_upper_bounds(p.alpha, p.rho, p.kl, p.g_star, p.K)
    return {
        "add_lb": add_lower_bound(p.alpha, p.kl, p.rho),
        "smap_ub": smap_upper_bound(p.alpha, p.rho, p.K),
        "ismap_ub": ismap_upper_bound(p.alpha, p.rho),
        "smap_ub_gstar": s_g,
        "ismap_ub_gstar": i_g,
        "smap_ub_limit": smap_upper_bound_limit(p.alpha, p.rho),
        "prop1_ub": prop1_upper_bound(p.eta, p.rho, p.kl, p.zeta),
        "ratio_limit": ratio_limit(p.alpha),
    }
