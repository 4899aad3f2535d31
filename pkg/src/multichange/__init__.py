"""Bayesian multiple change-point detection with a per-slot observation budget.

A fusion center watches K independent streams, can observe only
``ceil(q * K_n)`` of the ``K_n`` still-active ones per slot, and declares
changes while keeping the false discovery rate below ``alpha``.
"""

from .models import (GaussianMeanShift, PValueBeta, StreamTruth, glr_beta, kl_divergence,
                     likelihood_ratio, sample)
from .posterior import (GeometricPrior, HazardPrior, StreamState, posterior_oracle,
                        update_alr, update_observed, update_unobserved)
from .procedures import (ProcedureConfig, ProcedureKind, RunRecord, dfdr_thresholds,
                         ismap_threshold, run_procedure, smap_thresholds)
from .scheduling import SchedulerKind, select_map, select_random_consecutive, subset_size
from .metrics import MetricsSummary, add, ano, best_proportion, fdp, summarize, weighted_risk
from .harness import ExperimentConfig, SweepResult, generate_truths, run_experiment

__version__ = "0.1.0"
