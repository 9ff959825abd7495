"""Call admission control workbench for single-cell loss systems.

Analytic birth-death solutions for handover-priority and multiclass
threshold schemes, a seeded discrete-event simulator, a handover-rate
fixed point, and an acceptance-factor search.
"""
from .errors import (CacError, DegenerateInputError, DimensionError, NonConvergenceError,
                     ValidationError)
from .kernels import active_backend, available_backends, use_backend
from .markov import (AdmissionProfile, MetricsReport, StationaryDistribution, blocking_probability,
                     channel_utilization, compute_metrics, dropping_probability, erlang_b,
                     overall_blocking, stationary_distribution)
from .policies import (FGB, FGC, LFC, NPS, UBT, UFB, UFC, MultiFGB, build_profile,
                       evaluate_policy, reduction_check)
from .traffic import TrafficModel, estimate_handover_rate, handover_probability
from .des import SimConfig, SimReport, simulate
from .optimizer import SearchSpec, OptimizationResult, search_acceptance_factors

__version__ = "0.1.0"
