"""Fast invariant checks behind ``multichange validate``.

Each check returns ``(name, ok, detail)``.  These are exact (non-statistical)
properties, so they run in a couple of seconds.
"""

import itertools

import numpy as np

from . import bounds as bnd
from .models import GaussianMeanShift, PValueBeta, glr_beta
from .posterior import (GeometricPrior, log_alr_update, observed_log_odds, posterior_oracle,
                        prob, unobserved_log_odds)
from .procedures import ProcedureConfig, simulate
from .randomness import TAG_CHANGE_POINT, CounterRandom
from .scheduling import select_map, select_random_consecutive, subset_size


def recursion_matches_oracle(rng, horizon=10, rho=0.05):
    model = GaussianMeanShift()
    prior = GeometricPrior(rho)
    x = rng.normal(0.5, 1.0, horizon)
    worst = 0.0
    for mask in itertools.product([False, True], repeat=horizon):
        lo = -np.inf
        for n in range(1, horizon + 1):
            if mask[n - 1]:
                lo = observed_log_odds(lo, rho, model.log_lr(x[n - 1]))
            else:
                lo = unobserved_log_odds(lo, rho)
        obs = [(n, x[n - 1]) for n in range(1, horizon + 1) if mask[n - 1]]
        ref = posterior_oracle(obs, prior, model, horizon, cutoff=horizon + 5)
        worst = max(worst, abs(prob(lo) - ref))
    return worst


def alr_identity(rng, paths=100, horizon=50, rho=0.01):
    """Worst relative error of G_n (1 - pi_n) = (1 - rho)^n on full-observation paths."""
    model = GaussianMeanShift()
    worst = 0.0
    for _ in range(paths):
        t = rng.geometric(rho)
        lo, lg = -np.inf, 0.0
        for n in range(1, horizon + 1):
            x = rng.normal(1.0 if n >= t else 0.0)
            y = model.log_lr(x)
            lo = observed_log_odds(lo, rho, y)
            lg = log_alr_update(lg, y, n * np.log1p(-rho))
            lhs = lg + np.log1p(-prob(lo)) if prob(lo) < 0.5 else lg - np.logaddexp(0, lo)
            rel = abs(np.expm1(lhs - n * np.log1p(-rho)))
            worst = max(worst, rel)
    return worst


def bound_orderings(rng, draws=10_000):
    bad = 0
    for _ in range(draws):
        alpha = rng.uniform(1e-6, 0.999)
        rho = rng.uniform(1e-4, 0.999)
        kl = rng.uniform(0.0, 5.0)
        g = rng.uniform(1.0, 100.0)
        K = int(rng.integers(1, 10_000))
        lb = bnd.add_lower_bound(alpha, kl, rho)
        s_g, i_g = bnd.gstar_upper_bounds(alpha, rho, kl, g, K)
        i_ub = bnd.ismap_upper_bound(alpha, rho)
        s_ub = bnd.smap_upper_bound(alpha, rho, K)
        tol = 1e-12 * s_ub
        ok = lb <= i_g + tol and i_g <= i_ub + tol and i_ub <= s_ub + tol and i_g <= s_g + tol
        bad += not ok
    return bad


def run_checks(seed=0):
    rng = np.random.default_rng(seed)
    out = []

    err = recursion_matches_oracle(rng)
    out.append(("posterior recursion vs enumeration (1024 masks)", err < 1e-9, f"max |diff| {err:.2e}"))

    err = alr_identity(rng)
    out.append(("ALR identity G(1-pi) = (1-rho)^n", err < 1e-9, f"max rel err {err:.2e}"))

    bad = bound_orderings(rng)
    out.append(("asymptotic bound orderings", bad == 0, f"{bad} violations in 10000 draws"))

    seq = [bnd.seq_term(k) for k in range(1, 10_001)]
    mono = all(b > a for a, b in zip(seq, seq[1:]))
    out.append(("log K - log(K!)/K increasing", mono and seq[-1] < 1, f"value at 1e4: {seq[-1]:.6f}"))

    ok = (subset_size(0.05, 10) == 1 and subset_size(0.3, 10) == 3
          and select_map({1: 0.1, 2: 0.9, 3: 0.5}, 0.34) == {2, 3}
          and select_random_consecutive([2, 5, 9], 0.4, start=2) == {9, 2})
    out.append(("scheduler budgets and windows", ok, "fixed examples"))

    x = rng.uniform(0, 1, 1000)
    grid = np.linspace(10, 20, 100_001)
    ref = np.max(grid[None, :] * (1 - x[:, None]) ** (grid[None, :] - 1), axis=1)
    rel = float(np.max(np.abs(glr_beta(x, 10, 20) / ref - 1)))
    out.append(("GLR closed form vs grid search", rel < 1e-6, f"max rel diff {rel:.2e}"))

    K, rho = 20, 0.01
    src = CounterRandom(seed, range(50))
    t = (np.floor(np.log(src.stream_uniforms(TAG_CHANGE_POINT, K)) / np.log1p(-rho)) + 1).astype(int)
    model = PValueBeta()
    b = np.full(t.shape, 15.0)
    Ts, _, _ = simulate(ProcedureConfig("smap", 0.1, K, rho), model, t, b, src)
    Ti, _, _ = simulate(ProcedureConfig("ismap", 0.1, K, rho), model, t, b, src)
    viol = int(np.sum(Ti > Ts))
    out.append(("IS-MAP never later than S-MAP at q = 1", viol == 0, f"{viol} violations"))
    return out
