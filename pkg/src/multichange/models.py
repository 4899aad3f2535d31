"""Pre/post-change observation models.

Two scenarios are supported:

* ``GaussianMeanShift`` -- N(mu0, sigma^2) before the change, N(mu1, sigma^2)
  after it, with the exact likelihood ratio.
* ``PValueBeta`` -- p-values: Uniform(0, 1) before the change and Beta(1, b)
  after it, where each stream has its own unknown ``b`` in ``[b_min, b_max]``.
  The detector only knows the interval, so it works with the generalized
  likelihood ratio maximized over ``b``.

Densities are handled as log-likelihood ratios; ``likelihood_ratio`` only
exponentiates at the public boundary.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import ndtri

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class GaussianMeanShift:
    mu0: float = 0.0
    mu1: float = 1.0
    sigma: float = 1.0

    kind = "gaussian"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")

    def draw(self, u, post, b=None):
        """Transform uniforms ``u`` into observations; ``post`` marks slots >= t."""
        mean = np.where(post, self.mu1, self.mu0)
        return mean + self.sigma * ndtri(u)

    def log_lr(self, x):
        x = np.asarray(x, dtype=float)
        shift = self.mu1 - self.mu0
        return shift * (x - 0.5 * (self.mu0 + self.mu1)) / self.sigma ** 2

    def log_exact_lr(self, x, b=None):
        return self.log_lr(x)

    def kl(self, b=None):
        return (self.mu1 - self.mu0) ** 2 / (2.0 * self.sigma ** 2)


@dataclass(frozen=True)
class PValueBeta:
    b_min: float = 10.0
    b_max: float = 20.0

    kind = "pvalue_glr"

    def __post_init__(self):
        if not (self.b_min > 1 and self.b_max >= self.b_min):
            raise ConfigError(
                f"need b_max >= b_min > 1, got b_min={self.b_min}, b_max={self.b_max}")

    def draw(self, u, post, b=None):
        # inverse CDF of Beta(1, b): F(x) = 1 - (1 - x)^b
        u = np.asarray(u, dtype=float)
        if b is None:
            if np.any(post):
                raise ValueError("post-change p-values need the stream's b parameter")
            return u
        post_x = -np.expm1(np.log1p(-u) / b)
        return np.where(post, post_x, u)

    def log_lr(self, x):
        return log_glr_beta(x, self.b_min, self.b_max)

    def log_exact_lr(self, x, b):
        x = _check_unit(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(b) + (b - 1.0) * np.log1p(-x)

    def kl(self, b=None):
        if b is None:
            raise ValueError("the p-value scenario needs a Beta parameter b for KL")
        if not (self.b_min <= b <= self.b_max):
            raise DomainError(f"b={b} outside [{self.b_min}, {self.b_max}]")
        return float(np.log(b) - (b - 1.0) / b)


ScenarioModel = Union[GaussianMeanShift, PValueBeta]


@dataclass(frozen=True)
class StreamTruth:
    t: int
    b_true: Optional[float] = None

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"change point must be >= 1, got {self.t}")


def _check_unit(x):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise DomainError("p-value observations must lie in [0, 1]")
    return x


def glr_maximizer(x, b_min, b_max):
    """argmax over b in [b_min, b_max] of b (1 - x)^(b - 1)."""
    x = _check_unit(x)
    with np.errstate(divide="ignore", over="ignore"):
        l1 = np.log1p(-x)
        b_star = np.where(l1 < 0, -1.0 / np.where(l1 < 0, l1, -1.0), np.inf)
    return np.clip(b_star, b_min, b_max)


def log_glr_beta(x, b_min, b_max):
    x = _check_unit(x)
    b_star = glr_maximizer(x, b_min, b_max)
    with np.errstate(divide="ignore", invalid="ignore"):
        # x == 1 gives (b* - 1) * -inf = -inf, i.e. GLR 0
        return np.log(b_star) + (b_star - 1.0) * np.log1p(-x)


def glr_beta(x, b_min, b_max):
    """Beta(1, b) density maximized over b; f0 is uniform so this is the GLR."""
    out = np.exp(log_glr_beta(x, b_min, b_max))
    return float(out) if np.ndim(out) == 0 else out


def likelihood_ratio(model, x):
    out = np.exp(model.log_lr(x))
    return float(out) if np.ndim(out) == 0 else out


def kl_divergence(model, b=None):
    return float(model.kl(b))


def sample(model, truth, slot, rng):
    """One observation for ``slot`` (1-based) of a stream with the given truth."""
    if slot < 1:
        raise ValueError(f"slot must be >= 1, got {slot}")
    post = slot >= truth.t
    u = rng.random()
    # keep u inside (0, 1) so the inverse CDFs stay finite
    u = min(max(u, 2.0 ** -54), 1.0 - 2.0 ** -53)
    return float(model.draw(u, post, truth.b_true))


def make_model(scenario, **params):
    """Build a scenario from its config key and numeric fields."""
    if scenario == "gaussian":
        keys = ("mu0", "mu1", "sigma")
        return GaussianMeanShift(**{k: float(params[k]) for k in keys if k in params})
    if scenario == "pvalue_glr":
        keys = ("b_min", "b_max")
        return PValueBeta(**{k: float(params[k]) for k in keys if k in params})
    raise ConfigError(f"unknown scenario {scenario!r}; expected 'gaussian' or 'pvalue_glr'")
