import io
import math

import numpy as np
import pytest

from multichange.errors import CensoringGateError, ConfigError
from multichange.harness import (CSV_COLUMNS, ExperimentConfig, default_horizon, dumps_config,
                                 generate_truths, load_config, run_cell, run_experiment,
                                 sweep_weighted_risk, truth_arrays)
from multichange.models import GaussianMeanShift, PValueBeta
from multichange.randomness import CounterRandom


def small(**kw):
    base = dict(K=8, K_grid=[8], q_grid=[0.5, 1.0], c_grid=[0.0, 0.5, 1.0], runs=25,
                procedures=["smap", "ismap", "dfdr"], seed=5)
    base.update(kw)
    return ExperimentConfig(**base)


def test_generate_truths_geometric(rng):
    t = np.array([tr.t for tr in generate_truths(100_000, 0.01, GaussianMeanShift(), rng)])
    se = t.std(ddof=1) / math.sqrt(t.size)
    assert abs(t.mean() - 100) <= 3 * se
    p1 = np.mean(t == 1)
    assert abs(p1 - 0.01) <= 3 * math.sqrt(0.01 * 0.99 / t.size)
    assert t.min() >= 1


def test_generate_truths_degenerate_and_beta(rng):
    assert all(tr.t == 1 for tr in generate_truths(50, 1.0, GaussianMeanShift(), rng))
    trs = generate_truths(2000, 0.1, PValueBeta(10, 20), rng)
    b = np.array([tr.b_true for tr in trs])
    assert b.min() >= 10 and b.max() <= 20 and abs(b.mean() - 15) < 0.3


def test_counter_truths_match_geometric():
    src = CounterRandom(1, range(2000))
    t, b = truth_arrays(src, 50, 0.01, GaussianMeanShift())
    assert b is None
    se = t.std(ddof=1) / math.sqrt(t.size)
    assert abs(t.mean() - 100) <= 3 * se


def test_default_horizon():
    assert default_horizon(0.01, 0.1, 0.01) == 5000
    assert ExperimentConfig(horizon=123).effective_horizon == 123


def test_config_validation():
    for bad in (dict(alpha=1.5), dict(runs=0), dict(procedures=["cusum"]), dict(q_grid=[]),
                dict(scenario="poisson"), dict(scheduler="lottery"), dict(sigma=0.0)):
        with pytest.raises(ConfigError):
            ExperimentConfig(**bad)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"nope": 1})


def test_config_roundtrip(tmp_path):
    cfg = small(scenario="pvalue_glr", rho_assumed=0.005)
    path = tmp_path / "c.toml"
    path.write_text(dumps_config(cfg))
    assert load_config(path) == cfg
    assert load_config(path, {"seed": 9}).seed == 9
    path.write_text("K = [\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_sweep_rows_and_csv_reproducible():
    cfg = small()
    a, b = run_experiment(cfg), run_experiment(cfg)
    # smap and ismap at two q values, dfdr once, each for three c values
    assert len(a.rows) == (2 + 2 + 1) * 3
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == ",".join(CSV_COLUMNS)
    assert a.to_json() == b.to_json()
    assert not a.gate_failed
    other = run_experiment(small(seed=6))
    assert other.to_csv() != a.to_csv()


def test_weighted_risk_endpoints():
    cfg = small(procedures=["ismap"], q_grid=[0.25, 0.5, 1.0])
    res = run_experiment(cfg)
    table = sweep_weighted_risk(res, cfg.c_grid)
    best = {row["c"]: row["best_q"] for row in table}
    assert best[0.0] == 1.0
    assert best[1.0] == 0.25
    row = res.select(procedure="ismap", q=0.5, c=0.5)[0]
    assert row.metrics.weighted_risk == pytest.approx(0.5 * row.metrics.add + 0.5 * row.metrics.ano)


def test_runs_independent_of_batching_and_workers():
    cfg = small()
    proc = cfg.procedure_config("smap", 0.5)
    one = run_cell(cfg, proc)
    cfg_b = small(batch_size=7)
    split = run_cell(cfg_b, proc)
    assert [r.to_json() for r in one] == [r.to_json() for r in split]
    par = run_experiment(small(workers=2))
    assert par.to_csv() == run_experiment(cfg).to_csv()


def test_common_randomness_across_cells():
    cfg = small()
    a = run_cell(cfg, cfg.procedure_config("smap", 1.0))
    b = run_cell(cfg, cfg.procedure_config("ismap", 0.5))
    assert all(np.array_equal(x.t, y.t) for x, y in zip(a, b))


def test_censoring_gate():
    cfg = small(horizon=3, procedures=["smap"], q_grid=[1.0])
    res = run_experiment(cfg)
    assert res.gate_failed and res.failed_cells[0]["censored_fraction"] > 0.01
    with pytest.raises(CensoringGateError) as info:
        run_experiment(cfg, strict=True)
    assert info.value.result.gate_failed


def test_bound_columns():
    res = run_experiment(small(procedures=["ismap"], q_grid=[1.0], c_grid=[0.0]))
    head, row = res.to_csv(bounds=True).splitlines()
    assert head.endswith("add_lb,smap_ub,ismap_ub")
    head, row = res.to_csv(bounds=True, g_star=2.0).splitlines()
    assert head.endswith("smap_ub_gstar,ismap_ub_gstar")
    vals = dict(zip(head.split(","), row.split(",")))
    assert float(vals["add_lb"]) == pytest.approx(4.514427168)
    assert float(vals["ismap_ub_gstar"]) == pytest.approx(math.log(10) / (0.25 + -math.log(0.99)))
    buf = io.StringIO()
    res.to_csv(buf)
    assert buf.getvalue() == res.to_csv()
