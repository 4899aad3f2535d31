"""Per-stream sequential statistics.

The posterior probability that a stream's change has already happened is
carried as log-odds ``log(pi / (1 - pi))``.  With hazard ``rho`` the odds obey

    observed:    odds <- L * (odds + rho) / (1 - rho)
    unobserved:  odds <- (odds + rho) / (1 - rho)

which keeps full resolution near thresholds such as ``1 - alpha / K`` where
``pi`` itself would round to 1.  ``-inf`` is pi = 0 and ``+inf`` is pi = 1
(absorbing).

The average likelihood ratio (ALR) used by the fully parallel baseline is kept
as a log value as well; its update ``G L + S (1 - L)`` with survival ``S``
needs a sign-aware log-sum because the second term is negative when L > 1.
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import expit, logsumexp

from .errors import DomainError


# -- log-odds helpers ---------------------------------------------------------

def log_odds(pi):
    pi = np.asarray(pi, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.log(pi) - np.log1p(-pi)
    return out


def prob(lo):
    out = expit(np.asarray(lo, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def unobserved_log_odds(lo, rho):
    lo = np.asarray(lo, dtype=float)
    return np.logaddexp(lo, np.log(rho)) - np.log1p(-rho)


def observed_log_odds(lo, rho, log_lr):
    lo = np.asarray(lo, dtype=float)
    with np.errstate(invalid="ignore"):
        new = unobserved_log_odds(lo, rho) + log_lr
    # pi = 1 is absorbing even when L = 0
    return np.where(lo == np.inf, np.inf, new)


def log_alr_update(log_g, log_lr, log_survival):
    """log(G L + S (1 - L)) from log G, log L and log S.

    Raises ``DomainError`` when the result is negative beyond rounding, which
    can only happen when ``G < S`` (inconsistent inputs).
    """
    log_g = np.asarray(log_g, dtype=float)
    y = np.asarray(log_lr, dtype=float)
    log_g, y, log_s = np.broadcast_arrays(log_g, y, np.asarray(log_survival, dtype=float))
    a = log_g + y
    with np.errstate(divide="ignore", invalid="ignore"):
        # log|1 - L|, stable for both large and small L
        log_gap = np.where(y > 0, y + np.log(-np.expm1(-np.abs(y))),
                           np.log(-np.expm1(np.minimum(y, 0.0))))
        b = log_s + log_gap
        up = a + np.log1p(-np.exp(b - a))        # L > 1: a - b
        down = np.logaddexp(a, b)                # L < 1: a + b
    out = np.where(y > 0, up, np.where(y < 0, down, a))
    bad = (y > 0) & (b > a + 1e-12 * np.maximum(1.0, np.abs(a)))
    if np.any(bad):
        raise DomainError("ALR update would be negative; survival exceeds G")
    # rounding-level ties collapse to G = 0
    out = np.where((y > 0) & np.isnan(out), -np.inf, out)
    return out


# -- scalar API -----------------------------------------------------------------

def update_observed(pi_prev, hazard, lr):
    """Posterior after observing a sample with likelihood ratio ``lr``."""
    with np.errstate(divide="ignore"):
        y = np.log(lr)
    return prob(observed_log_odds(log_odds(pi_prev), hazard, y))


def update_unobserved(pi_prev, hazard):
    return prob(unobserved_log_odds(log_odds(pi_prev), hazard))


def update_alr(g_prev, lr, survival):
    """ALR recursion ``G_n = G_{n-1} L + P(t >= n + 1) (1 - L)``."""
    if g_prev < 0 or lr < 0 or not (0 < survival <= 1):
        raise DomainError("update_alr needs g_prev >= 0, lr >= 0, survival in (0, 1]")
    with np.errstate(divide="ignore"):
        out = log_alr_update(np.log(g_prev), np.log(lr), np.log(survival))
    return float(np.exp(out))


# -- priors ---------------------------------------------------------------------

@dataclass(frozen=True)
class GeometricPrior:
    rho: float

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")

    def hazard(self, n):
        return self.rho

    def log_survival(self, n):
        """log P(t >= n + 1)."""
        return n * np.log1p(-self.rho)

    def log_pmf(self, m):
        return np.log(self.rho) + (m - 1) * np.log1p(-self.rho)


@dataclass(frozen=True)
class HazardPrior:
    """Arbitrary hazard sequence ``rho_n = P(t = n | t >= n)``, n = 1, 2, ...

    Past the end of the sequence the last hazard is repeated.
    """

    rho_n: Sequence[float]

    def __post_init__(self):
        vals = np.asarray(self.rho_n, dtype=float)
        if vals.size == 0 or np.any((vals <= 0) | (vals >= 1)):
            raise ValueError("every hazard value must lie in (0, 1)")
        object.__setattr__(self, "rho_n", tuple(vals.tolist()))

    def hazard(self, n):
        return self.rho_n[min(n, len(self.rho_n)) - 1]

    def log_survival(self, n):
        return float(sum(np.log1p(-self.hazard(i)) for i in range(1, n + 1)))

    def log_pmf(self, m):
        return float(np.log(self.hazard(m)) + self.log_survival(m - 1))


PriorSpec = Union[GeometricPrior, HazardPrior]


# -- per-stream state -------------------------------------------------------------

@dataclass(frozen=True)
class StreamState:
    log_odds: float = -np.inf
    log_alr: float = 0.0
    slot: int = 0
    active: bool = True
    declared_at: Optional[int] = None

    @property
    def posterior(self):
        return prob(self.log_odds)

    @property
    def alr(self):
        return float(np.exp(self.log_alr))

    def advance(self, prior, log_lr=None):
        """Move to the next slot; ``log_lr=None`` means the stream was not observed."""
        if not self.active:
            raise ValueError("declared streams are frozen")
        n = self.slot + 1
        rho = prior.hazard(n)
        if log_lr is None:
            return replace(self, slot=n, log_odds=float(unobserved_log_odds(self.log_odds, rho)))
        lo = float(observed_log_odds(self.log_odds, rho, log_lr))
        lg = float(log_alr_update(self.log_alr, log_lr, prior.log_survival(n)))
        return replace(self, slot=n, log_odds=lo, log_alr=lg)

    def declare(self):
        if not self.active:
            raise ValueError(f"stream already declared at slot {self.declared_at}")
        return replace(self, active=False, declared_at=self.slot)


# -- brute-force oracle ---------------------------------------------------------

def posterior_oracle(observations, prior, model, n, cutoff):
    """P(t <= n | data) by enumerating every change point t = 1..cutoff.

    ``observations`` is an iterable of ``(slot, value)`` pairs with slots <= n.
    The likelihood of the data under change point ``m`` (relative to "no
    change") is the product of likelihood ratios of observed slots >= m.
    Change points past ``cutoff`` contribute their prior tail mass with
    likelihood one.
    """
    obs = sorted((int(s), float(x)) for s, x in observations)
    if any(s > n or s < 1 for s, _ in obs):
        raise ValueError("observation slots must lie in 1..n")
    if cutoff < n:
        raise ValueError("cutoff must be at least n")
    slots = np.array([s for s, _ in obs], dtype=int)
    llr = np.array([float(model.log_lr(x)) for _, x in obs], dtype=float)

    log_terms = np.empty(cutoff)
    for m in range(1, cutoff + 1):
        log_terms[m - 1] = prior.log_pmf(m) + llr[slots >= m].sum()
    log_tail = prior.log_survival(cutoff)
    log_num = logsumexp(log_terms[:n])
    log_den = logsumexp(np.append(log_terms, log_tail))
    return float(np.exp(log_num - log_den))
