"""Acceptance criteria, one PASS/FAIL line each.

Monte Carlo cells are cached per session so criteria sharing a cell reuse it.
Run alone with ``pytest tests/test_acceptance.py -s -m slow``.
"""

import functools
import math

import numpy as np
import pytest

from multichange import bounds as bnd
from multichange.harness import ExperimentConfig, run_cell, truth_arrays
from multichange.metrics import best_proportion, summarize
from multichange.models import GaussianMeanShift
from multichange.posterior import (GeometricPrior, log_alr_update, observed_log_odds,
                                   posterior_oracle, prob, unobserved_log_odds)
from multichange.procedures import ProcedureConfig, simulate
from multichange.randomness import CounterRandom

pytestmark = pytest.mark.slow

SEED = 20200504
RUNS = 1000


@functools.lru_cache(maxsize=None)
def records(scenario="gaussian", proc="smap", q=1.0, K=100, runs=RUNS, rho_assumed=0.01,
            alpha=0.1, seed=SEED):
    cfg = ExperimentConfig(scenario=scenario, K=K, runs=runs, rho=0.01,
                           rho_assumed=rho_assumed, alpha=alpha, seed=seed)
    return run_cell(cfg, cfg.procedure_config(proc, q, K))


def summary(*args, **kw):
    return summarize(records(*args, **kw))


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return ok
    return emit


def test_criterion_01_fdr_gaussian(report):
    parts, ok = [], True
    for proc, lo, hi in (("smap", 0.01, 0.06), ("ismap", 0.04, 0.09)):
        for q in (0.25, 0.5, 1.0):
            f = summary(proc=proc, q=q).fdr
            ok &= f <= 0.1 and lo <= f <= hi
            parts.append(f"{proc}@{q}={f:.4f}")
    assert report("1 FDR control, Gaussian", ok, " ".join(parts))


def test_criterion_02_fdr_pvalue(report):
    parts, ok = [], True
    for proc, rho_a, cap in (("smap", 0.01, 0.11), ("ismap", 0.01, 0.13), ("ismap", 0.005, 0.1)):
        for q in (0.25, 0.5, 1.0):
            f = summary("pvalue_glr", proc, q, rho_assumed=rho_a).fdr
            ok &= f <= cap
            parts.append(f"{proc}(rho_a={rho_a})@{q}={f:.4f}<={cap}")
    assert report("2 FDR under model uncertainty", ok, " ".join(parts))


def _gap(a, b):
    """(b - a) in units of the unpaired standard error."""
    return (b.add - a.add) / math.hypot(a.se_add, b.se_add)


def test_criterion_03_add_ordering(report):
    is1, is5 = summary(proc="ismap", q=1.0), summary(proc="ismap", q=0.5)
    s1, d = summary(proc="smap", q=1.0), summary(proc="dfdr", q=1.0)
    simple = summary(proc="simple", q=0.5)
    chain = [("ismap@1", is1), ("ismap@0.5", is5), ("smap@1", s1), ("dfdr", d)]
    gaps = [_gap(a[1], b[1]) for a, b in zip(chain, chain[1:])]
    others = chain + [("smap@0.5", summary(proc="smap", q=0.5))]
    top = [_gap(s, simple) for _, s in others]
    ok = all(g > 3 for g in gaps) and all(g > 3 for g in top)
    detail = " < ".join(f"{n}={s.add:.3f}" for n, s in chain)
    detail += f"; simple@0.5={simple.add:.3f}; min gap {min(gaps + top):.1f} SE"
    assert report("3 ADD ordering", ok, detail)


def test_criterion_04_add_flat_in_K(report):
    parts, ok = [], True
    for proc, q in (("smap", 1.0), ("ismap", 1.0), ("smap", 0.5), ("ismap", 0.5), ("dfdr", 1.0)):
        adds = [summary(proc=proc, q=q, K=K).add for K in (10, 100, 200)]
        spread = (max(adds) - min(adds)) / np.mean(adds)
        ok &= spread < 0.15
        parts.append(f"{proc}@{q} " + "/".join(f"{a:.2f}" for a in adds) + f" ({spread:.1%})")
    assert report("4 ADD flat in K", ok, "; ".join(parts))


def test_criterion_05_tradeoff(report):
    qs = [round(0.1 * m, 1) for m in range(1, 11)]
    parts, ok = [], True
    for proc in ("smap", "ismap"):
        rows = [summary(proc=proc, q=q) for q in qs]
        for a, b in zip(rows, rows[1:]):
            ok &= b.add <= a.add + math.hypot(a.se_add, b.se_add)
            ok &= b.ano >= a.ano - math.hypot(a.se_ano, b.se_ano)
        best = best_proportion([(q, r.add, r.ano) for q, r in zip(qs, rows)], 0.2)
        ok &= best <= 0.5
        parts.append(f"{proc} best q at c=0.2: {best}")
    assert report("5 ADD/ANO tradeoff", ok, "; ".join(parts))


def test_criterion_06_posterior_oracle(report):
    rng = np.random.default_rng(6)
    model, rho, H = GaussianMeanShift(), 0.05, 10
    xs = rng.normal(0.5, 1.0, H)
    prior = GeometricPrior(rho)
    worst = 0.0
    for mask in range(2 ** H):
        seen = [(mask >> i) & 1 for i in range(H)]
        lo = -np.inf
        for s, x in zip(seen, xs):
            lo = observed_log_odds(lo, rho, model.log_lr(x)) if s else unobserved_log_odds(lo, rho)
        obs = [(n + 1, xs[n]) for n in range(H) if seen[n]]
        worst = max(worst, abs(prob(lo) - posterior_oracle(obs, prior, model, H, cutoff=60)))
    assert report("6 posterior recursion = enumeration", worst < 1e-9,
                  f"max |diff| over 1024 masks {worst:.2e}")


def test_criterion_07_alr_identity(report):
    rng = np.random.default_rng(7)
    model, rho, alpha, K = GaussianMeanShift(), 0.01, 0.1, 10
    worst, mismatches = 0.0, 0
    for _ in range(100):
        t = rng.geometric(rho)
        lo, lg = -np.inf, 0.0
        for n in range(1, 51):
            y = model.log_lr(rng.normal(1.0 if n >= t else 0.0))
            lo = observed_log_odds(lo, rho, y)
            lg = log_alr_update(lg, y, n * math.log1p(-rho))
            worst = max(worst, abs(math.expm1(lg - np.logaddexp(0, lo) - n * math.log1p(-rho))))
            for r in range(1, K + 1):
                tail = (1 - rho) ** n * r * alpha / K
                if abs(lg - math.log(K / (r * alpha))) > 1e-9:
                    mismatches += (lg >= math.log(K / (r * alpha))) != (
                        lo >= math.log1p(-tail) - math.log(tail))
    ok = worst < 1e-9 and mismatches == 0
    assert report("7 ALR identity and decision equivalence", ok,
                  f"max rel err {worst:.2e}, {mismatches} decision mismatches")


def test_criterion_08_bounds(report):
    seq = [bnd.seq_term(k) for k in range(1, 10_001)]
    mono = all(b > a for a, b in zip(seq, seq[1:]))
    s6 = bnd.seq_term(10 ** 6)
    ratio = bnd.ismap_upper_bound(0.1, 0.01) / bnd.smap_upper_bound(0.1, 0.01, 10 ** 6)
    rng = np.random.default_rng(8)
    bad = 0
    for _ in range(10_000):
        alpha, rho = rng.uniform(1e-6, 0.999), rng.uniform(1e-4, 0.999)
        kl, g, K = rng.uniform(0, 5), rng.uniform(1, 100), int(rng.integers(1, 10_000))
        lb = bnd.add_lower_bound(alpha, kl, rho)
        s_g, i_g = bnd.gstar_upper_bounds(alpha, rho, kl, g, K)
        i_ub, s_ub = bnd.ismap_upper_bound(alpha, rho), bnd.smap_upper_bound(alpha, rho, K)
        tol = 1e-12 * s_ub
        bad += not (lb <= i_g + tol and i_g <= i_ub + tol and i_ub <= s_ub + tol
                    and i_g <= s_g + tol and s_g <= s_ub + tol)
    ok = mono and abs(s6 - 1) < 1e-4 and abs(ratio - 0.697206) < 1e-3 and bad == 0
    assert report("8 bounds module", ok,
                  f"seq monotone={mono}, seq(1e6)={s6:.6f}, ratio={ratio:.6f}, {bad} ordering violations")


def _dominance(q):
    K, runs = 50, 100
    src = CounterRandom(SEED, range(runs))
    t, _ = truth_arrays(src, K, 0.01, GaussianMeanShift())
    m = GaussianMeanShift()
    Ts, _, _ = simulate(ProcedureConfig("smap", 0.1, K, 0.01, q=q), m, t, None, src)
    Ti, _, _ = simulate(ProcedureConfig("ismap", 0.1, K, 0.01, q=q), m, t, None, src)
    return int(np.sum(Ti > Ts)), Ts.size


def test_criterion_09_pathwise_dominance(report):
    viol, n = _dominance(1.0)
    assert report("9 pathwise T_IS <= T_S (q=1)", viol == 0, f"{viol} of {n} streams violate")


@pytest.mark.xfail(strict=True, reason="under a partial budget the two procedures' active sets "
                   "and observation schedules diverge, so pathwise order is not guaranteed")
def test_criterion_09_pathwise_dominance_partial_budget(report):
    viol, n = _dominance(0.5)
    assert report("9b pathwise T_IS <= T_S (q=0.5, known not to hold)", viol == 0,
                  f"{viol} of {n} streams violate")


def test_criterion_10_type_one_rates(report):
    K, alpha, runs = 10, 0.1, 10_000
    src = CounterRandom(SEED + 10, range(runs))
    t, _ = truth_arrays(src, 1, 0.01, GaussianMeanShift())
    ok, parts = True, []
    for r in range(1, K + 1):
        level = r * alpha / K
        # single stream stopping at the first posterior >= Q_r = 1 - level
        cfg = ProcedureConfig("ismap", level, 1, 0.01)
        T, _, _ = simulate(cfg, GaussianMeanShift(), t, None, src)
        early = (T[:, 0] < t[:, 0]).astype(float)
        rate, se = early.mean(), early.std(ddof=1) / math.sqrt(runs)
        ok &= rate <= level + 3 * se
        parts.append(f"r={r}: {rate:.4f}<={level:.2f}")
    assert report("10 per-stream Type I rates", ok, " ".join(parts))


def test_sanity_small_alpha_below_ismap_bound(report):
    ub = bnd.ismap_upper_bound(1e-3, 0.01)
    adds = {p: summary(proc=p, q=1.0, runs=200, alpha=1e-3).add for p in ("smap", "ismap")}
    ok = all(a < ub for a in adds.values())
    assert report("sanity alpha=1e-3 ADD below IS-MAP bound", ok,
                  " ".join(f"{p}={a:.2f}" for p, a in adds.items()) + f" < {ub:.1f}")
