"""Composite-likelihood estimation by averaged stochastic gradient descent.

The package fits composite (pairwise / pseudo-) likelihoods with cheap
unbiased stochastic gradients built from three cell-sampling schemes, and
quantifies the compound uncertainty of the averaged estimate: data sampling
variability plus the optimization noise injected by the chosen scheme.
"""

__version__ = "0.1.0"

from .data import Dataset, load_csv, save_csv
from .errors import (
    CapabilityError,
    ConditioningError,
    DivergenceError,
    NumericDomainError,
    TuningError,
    UnsupportedSchemeError,
)
from .gd import GDConfig, GDResult, gd_fit
from .inference import (
    SandwichEstimate,
    TestResult,
    confidence_intervals,
    cov_theta_bar,
    estimate_H,
    estimate_H_J,
    estimate_J,
    holm_adjust,
    sandwich,
    v_p,
    wald_tests,
)
from .models.base import CompositeModel, full_grad, full_loglik, holdout_negative_loglik
from .models.frailty import (
    FrailtyParams,
    GammaFrailtyModel,
    frailty_truth,
    pair_grad,
    pair_grad_constrained,
    pair_loglik,
    scaled_pair_weight,
    simulate_frailty,
)
from .models.ising import (
    IsingModel,
    IsingParams,
    conditional_grad,
    conditional_loglik,
    exact_sample,
    grid_truth,
    log_partition,
    pmf_table,
)
from .samplers import (
    ComponentSelection,
    RecycleBuffer,
    SchemeMoments,
    SchemeSpec,
    draw,
    draw_recycled,
    make_sampler,
    moments,
    replication_rng,
)
from .sgd import FitResult, OptimizerConfig, fit, holdout_stop_check, stepsize, stochastic_gradient

__all__ = [name for name in dir() if not name.startswith("_")]
