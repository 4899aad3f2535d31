"""Monte Carlo experiments: configuration, replication, sweeps and output.

All cells of an experiment share the same per-(run, stream, slot) random
numbers, so procedures and proportions are compared on identical change
points and sample paths (common random numbers).
"""

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import List

import numpy as np

from . import bounds as bnd
from . import randomness
from .errors import CensoringGateError, ConfigError
from .metrics import MetricsSummary, best_proportion, summarize
from .models import PValueBeta, StreamTruth, make_model
from .procedures import ProcedureConfig, ProcedureKind, run_batch
from .randomness import CounterRandom

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

CENSORING_GATE = 0.01

CSV_COLUMNS = [
    "procedure", "scenario", "K", "q", "alpha", "rho", "rho_assumed", "c",
    "fdr", "se_fdr", "add", "se_add", "ano", "se_ano", "censored_fraction",
    "n_runs", "seed",
]
BOUND_COLUMNS = ["add_lb", "smap_ub", "ismap_ub", "smap_ub_gstar", "ismap_ub_gstar"]


def _default_q_grid():
    return [round(0.05 * m, 2) for m in range(1, 21)]


@dataclass
class ExperimentConfig:
    # NOTE: the per-stream Beta parameter of the p-value scenario is drawn
    # uniformly from [b_min, b_max]; only the interval is given for that model.
    scenario: str = "gaussian"
    mu0: float = 0.0
    mu1: float = 1.0
    sigma: float = 1.0
    b_min: float = 10.0
    b_max: float = 20.0
    K: int = 100
    K_grid: List[int] = field(default_factory=lambda: [10, 100, 200, 500, 1000])
    rho: float = 0.01
    rho_assumed: float = 0.01
    alpha: float = 0.1
    procedures: List[str] = field(default_factory=lambda: ["smap", "ismap"])
    scheduler: str = ""
    q_grid: List[float] = field(default_factory=_default_q_grid)
    c_grid: List[float] = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(11)])
    runs: int = 1000
    seed: int = 20200504
    horizon: int = 0
    batch_size: int = 1000
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.scenario not in ("gaussian", "pvalue_glr"):
            raise ConfigError(f"scenario must be 'gaussian' or 'pvalue_glr', got {self.scenario!r}")
        for name in ("alpha", "rho_assumed"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if not 0 < self.rho <= 1:
            raise ConfigError(f"rho must lie in (0, 1], got {self.rho}")
        if self.K < 1 or any(k < 1 for k in self.K_grid):
            raise ConfigError("K values must be positive")
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if not self.procedures or not self.q_grid or not self.c_grid or not self.K_grid:
            raise ConfigError("procedures, q_grid, c_grid and K_grid must be nonempty")
        for p in self.procedures:
            if p not in {k.value for k in ProcedureKind}:
                raise ConfigError(f"unknown procedure {p!r}")
        if self.scheduler not in ("", "map", "consecutive", "full"):
            raise ConfigError(f"unknown scheduler {self.scheduler!r}")
        if any(not 0 <= q <= 1 for q in self.q_grid) or any(not 0 <= c <= 1 for c in self.c_grid):
            raise ConfigError("q_grid and c_grid values must lie in [0, 1]")
        if self.horizon < 0 or self.batch_size < 1 or self.workers < 1:
            raise ConfigError("horizon must be >= 0, batch_size and workers >= 1")
        self.model  # builds and validates the scenario parameters

    @property
    def model(self):
        return make_model(self.scenario, mu0=self.mu0, mu1=self.mu1, sigma=self.sigma,
                          b_min=self.b_min, b_max=self.b_max)

    @property
    def effective_horizon(self):
        if self.horizon:
            return self.horizon
        return default_horizon(self.rho, self.alpha, self.rho_assumed)

    def procedure_config(self, kind, q, K=None):
        sched = self.scheduler or None
        if kind in ("simple", "dfdr"):
            sched = None
        return ProcedureConfig(kind=kind, alpha=self.alpha, K=K or self.K,
                               rho_assumed=self.rho_assumed, q=q,
                               horizon=self.effective_horizon, scheduler=sched)

    def to_mapping(self):
        return asdict(self)

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**mapping)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def digest(self):
        blob = json.dumps(self.to_mapping(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def default_horizon(rho_true, alpha, rho_assumed):
    return int(math.ceil(max(50.0 / rho_true, 10.0 * bnd.ismap_upper_bound(alpha, rho_assumed))))


def load_config(path, overrides=None):
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    data.update(overrides or {})
    return ExperimentConfig.from_mapping(data)


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def dumps_config(config):
    return "".join(f"{k} = {_toml_value(v)}\n" for k, v in config.to_mapping().items())


# -- truths -------------------------------------------------------------------

def _geometric_from_uniform(u, rho):
    if rho >= 1:
        return np.ones(np.shape(u), dtype=np.int64)
    return (np.floor(np.log(u) / np.log1p(-rho)) + 1).astype(np.int64)


def generate_truths(K, rho_true, model, rng):
    """i.i.d. geometric change points on {1, 2, ...}; Beta parameters uniform."""
    u = 1.0 - rng.random(K)  # (0, 1]
    u = np.maximum(u, np.finfo(float).tiny)
    t = _geometric_from_uniform(u, rho_true)
    if isinstance(model, PValueBeta):
        b = rng.uniform(model.b_min, model.b_max, size=K)
        return [StreamTruth(int(ti), float(bi)) for ti, bi in zip(t, b)]
    return [StreamTruth(int(ti)) for ti in t]


def truth_arrays(source, K, rho_true, model):
    """Change points (runs, K) and Beta parameters (or None) from a counter source."""
    t = _geometric_from_uniform(source.stream_uniforms(randomness.TAG_CHANGE_POINT, K), rho_true)
    b = None
    if isinstance(model, PValueBeta):
        u = source.stream_uniforms(randomness.TAG_BETA_PARAM, K)
        b = model.b_min + (model.b_max - model.b_min) * u
    return t, b


# -- cells --------------------------------------------------------------------

def _run_chunk(args):
    proc, model, seed, run_ids, rho_true = args
    source = CounterRandom(seed, run_ids)
    t, b = truth_arrays(source, proc.K, rho_true, model)
    return run_batch(proc, model, t, b, source)


def run_cell(config, proc, runs=None, seed=None, pool=None):
    """All replications of one (procedure, q, K) cell, in run order."""
    runs = config.runs if runs is None else runs
    seed = config.seed if seed is None else seed
    model = config.model
    chunks = [(proc, model, seed, list(range(s, min(s + config.batch_size, runs))), config.rho)
              for s in range(0, runs, config.batch_size)]
    results = pool.map(_run_chunk, chunks) if pool else map(_run_chunk, chunks)
    return [rec for batch in results for rec in batch]


@dataclass
class SweepRow:
    procedure: str
    scenario: str
    K: int
    q: float
    alpha: float
    rho: float
    rho_assumed: float
    seed: int
    metrics: MetricsSummary

    @property
    def c(self):
        return self.metrics.c

    def as_dict(self):
        d = {k: getattr(self, k) for k in ("procedure", "scenario", "K", "q", "alpha",
                                           "rho", "rho_assumed", "seed")}
        d.update(self.metrics.as_dict())
        return d


@dataclass
class SweepResult:
    rows: List[SweepRow]
    config_hash: str
    seed: int
    failed_cells: List[dict] = field(default_factory=list)
    model: object = None

    @property
    def gate_failed(self):
        return bool(self.failed_cells)

    def select(self, procedure=None, K=None, q=None, c=None):
        out = []
        for r in self.rows:
            if procedure is not None and r.procedure != procedure:
                continue
            if K is not None and r.K != K:
                continue
            if q is not None and not math.isclose(r.q, q):
                continue
            if c is not None and not math.isclose(r.c, c):
                continue
            out.append(r)
        return out

    def to_csv(self, fh=None, bounds=False, g_star=None, kl=None):
        buf = fh or io.StringIO()
        cols = list(CSV_COLUMNS)
        if bounds:
            # g* bounds only make sense for a user-chosen g*
            cols += BOUND_COLUMNS if g_star is not None else BOUND_COLUMNS[:3]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for r in self.rows:
            d = r.as_dict()
            if bounds:
                d.update(bound_columns(r, self.model, g_star=g_star, kl=kl))
            writer.writerow([_fmt(d[c]) for c in cols])
        return buf.getvalue() if fh is None else None

    def summary(self):
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "gate_failed": self.gate_failed,
            "failed_cells": self.failed_cells,
            "rows": [r.as_dict() for r in self.rows],
        }

    def to_json(self):
        return json.dumps(self.summary(), indent=2, sort_keys=True, default=_json_default)


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(type(v))


def _kl_pair(model):
    """(KL for lower bounds, KL for upper bounds).

    With an unknown Beta parameter, the largest KL keeps the lower bound valid
    for every b in range and the smallest keeps the g* upper bounds valid.
    """
    if isinstance(model, PValueBeta):
        return model.kl(model.b_max), model.kl(model.b_min)
    k = model.kl()
    return k, k


def bound_columns(row, model, g_star=None, kl=None):
    kl_lo, kl_hi = (kl, kl) if kl is not None else _kl_pair(model)
    rho = row.rho_assumed
    s_g, i_g = (float("nan"), float("nan"))
    if g_star is not None:
        s_g, i_g = bnd.gstar_upper_bounds(row.alpha, rho, kl_hi, g_star, row.K)
    return {
        "add_lb": bnd.add_lower_bound(row.alpha, kl_lo, rho),
        "smap_ub": bnd.smap_upper_bound(row.alpha, rho, row.K),
        "ismap_ub": bnd.ismap_upper_bound(row.alpha, rho),
        "smap_ub_gstar": s_g,
        "ismap_ub_gstar": i_g,
    }


def cells(config, procedures=None, q_values=None, K_values=None):
    """(procedure, q, K) cells; D-FDR always observes everything so it gets q = 1 once."""
    out = []
    for K in (K_values or config.K_grid):
        for p in (procedures or config.procedures):
            qs = [1.0] if p == "dfdr" or config.scheduler == "full" else (q_values or config.q_grid)
            for q in qs:
                if (p, q, K) not in out:
                    out.append((p, q, K))
    return out


def run_experiment(config, procedures=None, q_values=None, K_values=None, strict=False):
    """Run every cell and aggregate; identical (config, seed) gives identical output."""
    rows, failed = [], []
    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for p, q, K in cells(config, procedures, q_values, K_values):
            proc = config.procedure_config(p, q, K)
            records = run_cell(config, proc, pool=pool)
            for c in config.c_grid:
                m = summarize(records, c)
                rows.append(SweepRow(p, config.scenario, K, proc.q, config.alpha, config.rho,
                                     config.rho_assumed, config.seed, m))
            frac = rows[-1].metrics.censored_fraction
            if frac > CENSORING_GATE:
                failed.append({"procedure": p, "q": proc.q, "K": K, "censored_fraction": frac})
    finally:
        if pool:
            pool.shutdown()
    result = SweepResult(rows, config.digest(), config.seed, failed, model=config.model)
    if strict and failed:
        raise CensoringGateError(f"{len(failed)} cells exceed {CENSORING_GATE:.0%} censoring", result)
    return result


def sweep_weighted_risk(sweep, c_grid):
    """Best q per (c, procedure, K) plus whether best q is non-increasing in c."""
    groups = {}
    for r in sweep.rows:
        groups.setdefault((r.procedure, r.K), {})[r.q] = (r.metrics.add, r.metrics.ano)
    out = []
    for (proc, K), by_q in groups.items():
        entries = [(q, a, o) for q, (a, o) in sorted(by_q.items())]
        best = [best_proportion(entries, c) for c in sorted(c_grid)]
        monotone = all(b2 <= b1 for b1, b2 in zip(best, best[1:]))
        for c, q in zip(sorted(c_grid), best):
            out.append({"c": c, "procedure": proc, "K": K, "best_q": q, "monotone": monotone})
    return out
