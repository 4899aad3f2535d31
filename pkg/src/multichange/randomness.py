"""Counter-based random numbers keyed by (seed, run, stream, slot).

Every uniform is a pure function of its coordinates, so two procedures run on
the same seed see exactly the same sample paths no matter which streams they
choose to observe, and a replication's trajectory does not depend on how many
other replications share its batch.  The mixing function is the SplitMix64
finalizer applied to chained 64-bit words.
"""

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# domain-separation tags
TAG_CHANGE_POINT = 1
TAG_BETA_PARAM = 2
TAG_OBSERVATION = 3
TAG_SCHEDULE = 4

_U64 = np.uint64


def mix_int(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix_array(z):
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> _U64(30))) * _U64(_M1)
    z = (z ^ (z >> _U64(27))) * _U64(_M2)
    return z ^ (z >> _U64(31))


def hash_words(*words):
    """Hash a sequence of python ints into one 64-bit word."""
    h = 0
    for w in words:
        h = mix_int(h ^ mix_int((int(w) + _GOLDEN) & MASK64))
    return h


def _combine(h, w):
    # h: uint64 array, w: uint64 array or python int
    if isinstance(w, (int, np.integer)):
        w = _U64(mix_int((int(w) + _GOLDEN) & MASK64))
    else:
        w = mix_array(np.asarray(w, dtype=np.uint64) + _U64(_GOLDEN))
    return mix_array(h ^ w)


def to_unit(h):
    """Map 64-bit words to uniforms strictly inside (0, 1)."""
    h = np.asarray(h, dtype=np.uint64)
    return ((h >> _U64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)


class CounterRandom:
    """Uniform draws addressed by coordinates instead of by call order.

    ``run_ids`` fixes which replications this source serves; stream indices
    are 0-based positions within a run.
    """

    def __init__(self, seed, run_ids=(0,)):
        self.seed = int(seed) & MASK64
        self.run_ids = np.asarray(run_ids, dtype=np.int64)
        run_keys = [hash_words(self.seed, r) for r in self.run_ids.tolist()]
        self._run_keys = np.asarray(run_keys, dtype=np.uint64)

    @property
    def n_runs(self):
        return len(self.run_ids)

    def subset(self, rows):
        out = CounterRandom.__new__(CounterRandom)
        out.seed = self.seed
        out.run_ids = self.run_ids[rows]
        out._run_keys = self._run_keys[rows]
        return out

    def stream_keys(self, tag, n_streams):
        """Per-(run, stream) base words for one tag, shape (n_runs, n_streams)."""
        h = _combine(self._run_keys[:, None], tag)
        return _combine(h, np.arange(n_streams, dtype=np.uint64)[None, :])

    def stream_uniforms(self, tag, n_streams):
        return to_unit(mix_array(self.stream_keys(tag, n_streams)))

    def slot_uniforms(self, tag, slot, rows=None):
        """One uniform per run for a given slot (used by random schedulers)."""
        keys = self._run_keys if rows is None else self._run_keys[rows]
        h = _combine(_combine(keys, tag), slot)
        return to_unit(mix_array(h))


def keyed_uniforms(base_keys, slot):
    """Uniforms for observation words ``base_keys`` at a given slot."""
    return to_unit(mix_array(_combine(base_keys, slot)))
