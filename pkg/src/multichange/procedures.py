"""Detection procedures and the slot-by-slot simulation engine.

Four procedures share one engine:

``smap``    step-up over sorted posteriors against ``1 - r alpha / K`` with MAP
            scheduling.
``ismap``   flat threshold ``1 - alpha`` with MAP scheduling.
``simple``  the ``smap`` thresholds with a random window of consecutive streams.
``dfdr``    every stream observed every slot, step-up over the average
            likelihood ratio against ``K / (r alpha)``.

The engine advances a batch of independent replications at once (arrays of
shape ``(runs, K)``).  Finished replications are dropped from the working set,
and every random draw is addressed by (run, stream, slot), so a replication's
path is the same whatever batch it runs in.
"""

import enum
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import randomness
from .errors import ConfigError
from .posterior import log_alr_update, unobserved_log_odds
from .randomness import CounterRandom, keyed_uniforms
from .scheduling import SchedulerKind, consecutive_mask, map_mask, subset_sizes


class ProcedureKind(str, enum.Enum):
    SMAP = "smap"
    ISMAP = "ismap"
    SIMPLE = "simple"
    DFDR = "dfdr"


@dataclass(frozen=True)
class ProcedureConfig:
    kind: ProcedureKind
    alpha: float
    K: int
    rho_assumed: float
    q: float = 1.0
    horizon: int = 5000
    scheduler: Optional[SchedulerKind] = None

    def __post_init__(self):
        kind = ProcedureKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.K < 1:
            raise ConfigError(f"K must be positive, got {self.K}")
        if not 0 < self.rho_assumed < 1:
            raise ConfigError(f"rho_assumed must lie in (0, 1), got {self.rho_assumed}")
        if not 0 <= self.q <= 1:
            raise ConfigError(f"q must lie in [0, 1], got {self.q}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        sched = self.scheduler
        if kind is ProcedureKind.DFDR:
            sched = SchedulerKind.FULL
            object.__setattr__(self, "q", 1.0)
        elif kind is ProcedureKind.SIMPLE:
            sched = SchedulerKind.CONSECUTIVE
        elif sched is None:
            sched = SchedulerKind.MAP
        object.__setattr__(self, "scheduler", SchedulerKind(sched))
        if self.scheduler is SchedulerKind.FULL:
            object.__setattr__(self, "q", 1.0)

    @property
    def step_up(self):
        return self.kind is not ProcedureKind.ISMAP


# -- thresholds -----------------------------------------------------------------

def smap_thresholds(K, alpha):
    r = np.arange(1, K + 1)
    return 1.0 - r * alpha / K


def ismap_threshold(alpha):
    return 1.0 - alpha


def dfdr_thresholds(K, alpha):
    r = np.arange(1, K + 1)
    return K / (r * alpha)


def log_thresholds(config):
    """Thresholds on the engine's log statistic, indexed by rank r = 1..K.

    Posterior thresholds become log-odds; ALR thresholds become log G.
    """
    K, alpha = config.K, config.alpha
    r = np.arange(1, K + 1)
    if config.kind is ProcedureKind.DFDR:
        return np.log(K) - np.log(r * alpha)
    if config.kind is ProcedureKind.ISMAP:
        tail = np.full(K, alpha)
    else:
        tail = r * alpha / K
    return np.log1p(-tail) - np.log(tail)


# -- run records ----------------------------------------------------------------

@dataclass
class RunRecord:
    """Outcome of one replication.

    ``T`` holds the declaration slot per stream and ``inf`` for streams still
    active at the horizon.  ``observed_counts[n - 1]`` is the number of streams
    observed in slot ``n``, up to the last simulated slot.
    """

    t: np.ndarray
    T: np.ndarray
    observed_counts: np.ndarray
    horizon: int
    q: float = 1.0
    run_id: int = 0

    @property
    def K(self):
        return len(self.t)

    @property
    def censored(self):
        return set(np.flatnonzero(~np.isfinite(self.T)).tolist())

    @property
    def stages(self):
        """(n_j, declared stream ids) in order of declaration."""
        finite = np.isfinite(self.T)
        out = []
        for n in np.unique(self.T[finite]):
            ids = tuple(np.flatnonzero(self.T == n).tolist())
            out.append((int(n), ids))
        return out

    def to_json(self):
        return json.dumps({
            "run_id": int(self.run_id),
            "horizon": int(self.horizon),
            "q": float(self.q),
            "t": self.t.astype(int).tolist(),
            "T": [int(v) if np.isfinite(v) else None for v in self.T],
            "observed_counts": self.observed_counts.astype(int).tolist(),
        }, separators=(",", ":"))

    @classmethod
    def from_json(cls, line):
        d = json.loads(line)
        T = np.array([np.inf if v is None else v for v in d["T"]], dtype=float)
        return cls(t=np.asarray(d["t"], dtype=np.int64), T=T,
                   observed_counts=np.asarray(d["observed_counts"], dtype=np.int64),
                   horizon=d["horizon"], q=d["q"], run_id=d["run_id"])


def write_records(records, fh):
    for rec in records:
        fh.write(rec.to_json() + "\n")


def read_records(fh):
    return [RunRecord.from_json(line) for line in fh if line.strip()]


# -- engine ---------------------------------------------------------------------

def _declarations(stat, active, config, thr):
    """Boolean mask of streams declared this slot."""
    if config.kind is ProcedureKind.ISMAP:
        return active & (stat >= thr[0])
    K = stat.shape[1]
    # every declaration needs at least the loosest threshold
    cand = np.flatnonzero((active & (stat >= thr[-1])).any(axis=1))
    dec = np.zeros_like(active)
    if cand.size == 0:
        return dec
    sub_stat, sub_act = stat[cand], active[cand]
    vals = np.sort(np.where(sub_act, sub_stat, -np.inf), axis=1)
    n_inactive = K - sub_act.sum(axis=1)
    p = np.arange(K)[None, :]
    # ascending position p holds active rank l = p - n_inactive + 1,
    # tested against Q_{K - l + 1}
    r = K - p + n_inactive[:, None]
    valid = p >= n_inactive[:, None]
    cond = valid & (vals >= thr[np.clip(r, 1, K) - 1])
    has = cond.any(axis=1)
    first = np.argmax(cond, axis=1)
    cut = vals[np.arange(cand.size), first]
    dec[cand] = sub_act & (sub_stat >= cut[:, None]) & has[:, None]
    return dec


def simulate(config, model, t, b, source):
    """Advance ``len(t)`` replications until every stream is declared.

    Parameters
    ----------
    t : int array (runs, K) of true change points.
    b : float array (runs, K) of post-change Beta parameters, or None.
    source : CounterRandom serving exactly these runs.

    Returns ``(T, counts, last_slot)`` with ``T`` float (inf = censored),
    ``counts`` int (runs, horizon) and ``last_slot`` the final simulated slot.
    """
    t = np.asarray(t, dtype=np.int64)
    R, K = t.shape
    if K != config.K:
        raise ConfigError(f"truths have {K} streams but the procedure expects K={config.K}")
    if source.n_runs != R:
        raise ValueError("random source and truths disagree on the number of runs")
    H = config.horizon
    rho = config.rho_assumed
    log1m_rho = np.log1p(-rho)
    thr = log_thresholds(config)
    dfdr = config.kind is ProcedureKind.DFDR

    T = np.full((R, K), np.inf)
    counts = np.zeros((R, H), dtype=np.int32)
    last = np.zeros(R, dtype=np.int64)

    rows = np.arange(R)
    stat = np.full((R, K), 0.0 if dfdr else -np.inf)
    active = np.ones((R, K), dtype=bool)
    keys = source.stream_keys(randomness.TAG_OBSERVATION, K)
    t_live = t
    b_live = None if b is None else np.asarray(b, dtype=float)
    src = source

    for n in range(1, H + 1):
        if rows.size == 0:
            break
        k_n = active.sum(axis=1)
        if config.scheduler is SchedulerKind.FULL:
            m = k_n
        else:
            m = subset_sizes(config.q, k_n)
        if np.array_equal(m, k_n):
            sel = active
        elif config.scheduler is SchedulerKind.MAP:
            sel = map_mask(stat, active, m)
        else:
            u = src.slot_uniforms(randomness.TAG_SCHEDULE, n)
            sel = consecutive_mask(active, m, u)
        counts[rows, n - 1] = m

        ri, ki = np.nonzero(sel)
        if ri.size:
            u = keyed_uniforms(keys[ri, ki], n)
            post = n >= t_live[ri, ki]
            x = model.draw(u, post, None if b_live is None else b_live[ri, ki])
            llr = model.log_lr(x)
        if dfdr:
            # unobserved streams keep G (L = 1 leaves the recursion fixed)
            if ri.size:
                stat[ri, ki] = log_alr_update(stat[ri, ki], llr, n * log1m_rho)
        else:
            stat = np.where(active, unobserved_log_odds(stat, rho), stat)
            if ri.size:
                cur = stat[ri, ki]
                with np.errstate(invalid="ignore"):
                    stat[ri, ki] = np.where(cur == np.inf, np.inf, cur + llr)

        dec = _declarations(stat, active, config, thr)
        if dec.any():
            rr, kk = np.nonzero(dec)
            T[rows[rr], kk] = n
            active = active & ~dec
        last[rows] = n

        done = ~active.any(axis=1)
        if done.any():
            keep = ~done
            rows, stat, active = rows[keep], stat[keep], active[keep]
            keys, t_live = keys[keep], t_live[keep]
            if b_live is not None:
                b_live = b_live[keep]
            src = src.subset(keep)
    return T, counts, last


def run_batch(config, model, t, b, source):
    """Simulate a batch and wrap each replication in a ``RunRecord``."""
    T, counts, last = simulate(config, model, t, b, source)
    out = []
    for i in range(T.shape[0]):
        out.append(RunRecord(
            t=np.asarray(t[i], dtype=np.int64), T=T[i],
            observed_counts=counts[i, :last[i]].astype(np.int64),
            horizon=config.horizon, q=config.q, run_id=int(source.run_ids[i])))
    return out


def run_procedure(config, truths, model, rng):
    """Run one replication for the given per-stream truths.

    ``rng`` may be a ``CounterRandom`` for a single run, an integer seed, or a
    ``numpy.random.Generator`` (one 63-bit seed is drawn from it).
    """
    if len(truths) != config.K:
        raise ConfigError(f"expected {config.K} truths, got {len(truths)}")
    if isinstance(rng, CounterRandom):
        source = rng
    elif isinstance(rng, np.random.Generator):
        source = CounterRandom(int(rng.integers(2 ** 63)))
    else:
        source = CounterRandom(int(rng))
    if source.n_runs != 1:
        raise ValueError("run_procedure needs a single-run random source")
    t = np.array([[tr.t for tr in truths]], dtype=np.int64)
    bs = [tr.b_true for tr in truths]
    b = None if all(v is None for v in bs) else np.array([bs], dtype=float)
    return run_batch(config, model, t, b, source)[0]
