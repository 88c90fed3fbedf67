"""Simulation and Wasserstein convergence diagnostics for McKean-Vlasov,
self-interacting and interacting-particle SDEs."""

from .harness import (
    ConvergenceTable,
    GaussianReference,
    OuReport,
    RateFit,
    StudySpec,
    fit_rate,
    guaranteed_exponent,
    reproduce_ou,
    run_convergence,
)
from .kernels import BACKEND
from .measures import (
    DiscreteWeights,
    EmpiricalMeasure,
    GaussianMeasure,
    MomentAccumulator,
    WeightFamily,
    make_empirical,
    pi1_statistic,
    pi2_statistic,
    realize_weights,
    weighted_empirical,
)
from .model import (
    MvModel,
    ProbePlan,
    cubic,
    kappa,
    linear,
    make_model,
    mean_field_ou,
    probe_dissipativity,
    probe_monotonicity,
)
from .sde import (
    PathRecord,
    SimConfig,
    SimulationBlowUp,
    simulate_frozen,
    simulate_particles,
    simulate_self_interacting,
)
from .wasserstein import w2_1d, w2_exact_small, w2_sliced, w2_vs_gaussian_1d

__version__ = "0.1.0"
