"""Which active streams the fusion center observes in a slot.

The budget is ``ceil(q * K_n)`` streams out of ``K_n`` active ones.  The MAP
rule picks the streams with the largest current posterior (ties to the
smallest id); the random-consecutive rule picks a circular window over the
positions of the sorted active list, starting at a uniform position.
"""

import enum
import math

import numpy as np


class SchedulerKind(str, enum.Enum):
    MAP = "map"
    CONSECUTIVE = "consecutive"
    FULL = "full"


def subset_size(q, k_n):
    if not 0 <= q <= 1:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    # round first: 0.3 * 10 is 3.0000000000000004 in binary floating point
    return int(math.ceil(round(q * k_n, 9)))


def subset_sizes(q, k_n):
    """Vectorized ``subset_size`` over an array of active counts."""
    return np.ceil(np.round(q * np.asarray(k_n), 9)).astype(np.int64)


def select_map(posteriors, q):
    """Ids of the ``ceil(q * n)`` largest posteriors; ties go to the smaller id."""
    m = subset_size(q, len(posteriors))
    ranked = sorted(posteriors.items(), key=lambda kv: (-kv[1], kv[0]))
    return {k for k, _ in ranked[:m]}


def select_random_consecutive(active_ids, q, rng=None, start=None):
    """A circular window of consecutive active positions.

    ``start`` is a 0-based position in ``active_ids``; when omitted it is drawn
    uniformly with ``rng``.
    """
    ids = list(active_ids)
    if not ids:
        return set()
    m = subset_size(q, len(ids))
    if start is None:
        start = int(rng.integers(len(ids)))
    return {ids[(start + i) % len(ids)] for i in range(m)}


# -- batched masks used by the simulation engine -------------------------------
# stat, active: arrays of shape (runs, K); m: budget per run.

def map_mask(stat, active, m):
    k = stat.shape[1]
    finite = np.maximum(stat, -np.finfo(float).max)
    key = np.where(active, -finite, np.inf)
    order = np.argsort(key, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.broadcast_to(np.arange(k), order.shape), axis=1)
    return active & (ranks < m[:, None])


def consecutive_mask(active, m, u):
    """``u``: one uniform per run choosing the window's start position."""
    k_n = active.sum(axis=1)
    pos = np.cumsum(active, axis=1) - 1
    start = np.floor(u * k_n).astype(np.int64)
    span = np.maximum(k_n, 1)[:, None]
    rel = (pos - start[:, None]) % span
    return active & (rel < m[:, None])
