"""FDR, ADD, ANO and weighted risk from run records."""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import CensoredRunError


@dataclass(frozen=True)
class MetricsSummary:
    fdr: float
    add: float
    ano: float
    weighted_risk: float
    c: float
    n_runs: int
    se_fdr: float
    se_add: float
    se_ano: float
    censored_fraction: float
    censored_runs: int = 0

    def as_dict(self):
        return asdict(self)


def fdp(record):
    """False discovery proportion V / max(R, 1); censored streams count as T = inf."""
    declared = np.isfinite(record.T)
    R = int(declared.sum())
    V = int((declared & (record.T < record.t)).sum())
    return V / max(R, 1)


def add(record, exclude_censored=False):
    """Mean over streams of max(0, T - t).

    A censored run raises ``CensoredRunError`` unless ``exclude_censored`` is
    set, in which case the mean runs over declared streams only.
    """
    declared = np.isfinite(record.T)
    if not declared.all():
        if not exclude_censored:
            raise CensoredRunError(
                f"run {record.run_id} has {int((~declared).sum())} censored streams")
        if not declared.any():
            return float("nan")
    delay = np.maximum(0.0, record.T[declared] - record.t[declared])
    return float(delay.sum() / declared.sum())


def ano(record):
    """(1/K) * total observations drawn until the last declaration.

    For censored runs the recorded counts end at the horizon.
    """
    return float(np.sum(record.observed_counts) / record.K)


def weighted_risk(add_value, ano_value, c):
    return (1.0 - c) * add_value + c * ano_value


def best_proportion(sweep, c):
    """q with the smallest weighted risk; ties go to the smaller q.

    ``sweep`` is a sequence of ``(q, add, ano)`` triples.
    """
    if not sweep:
        raise ValueError("best_proportion needs a nonempty sweep")
    return min(sweep, key=lambda e: (weighted_risk(e[1], e[2], c), e[0]))[0]


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return float("nan"), float("nan")
    mean = float(np.sum(v) / v.size)
    se = float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return mean, se


def per_run(records):
    """Per-run (fdp, add, ano) arrays in record order."""
    f = np.array([fdp(r) for r in records])
    a = np.array([add(r, exclude_censored=True) for r in records])
    o = np.array([ano(r) for r in records])
    return f, a, o


def summarize(records, c=0.0):
    """Monte Carlo estimates with standard errors from per-run values.

    Censored streams are left out of a run's ADD and the run is counted in
    ``censored_runs``; ``censored_fraction`` is the share of censored streams.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to summarize")
    f, a, o = per_run(records)
    fdr, se_f = _mean_se(f)
    add_v, se_a = _mean_se(a)
    ano_v, se_o = _mean_se(o)
    n_cens = sum(len(r.censored) for r in records)
    n_streams = sum(r.K for r in records)
    runs_cens = sum(1 for r in records if r.censored)
    return MetricsSummary(
        fdr=fdr, add=add_v, ano=ano_v, weighted_risk=weighted_risk(add_v, ano_v, c),
        c=c, n_runs=len(records), se_fdr=se_f, se_add=se_a, se_ano=se_o,
        censored_fraction=n_cens / n_streams, censored_runs=runs_cens)
