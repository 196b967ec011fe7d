"""Stationary determinantal point processes on rectangular windows.

Parametric kernel families with existence bounds and closed-form summaries,
exact-in-distribution simulation via the Fourier spectral lattice, spectral
likelihood approximation with maximum-likelihood and minimum-contrast
fitting, and summary-statistic diagnostics with simulation envelopes.
"""

__version__ = "0.1.0"

from . import errors
from ._special import bessel_k, log_bessel_k, matern_correlation
from .geometry import AffineBoxMap, PointPattern, Window, transform_pattern
from .likelihood import (
    FitResult,
    compare_models,
    fit_mle,
    log_density_convolution,
    log_density_periodic,
    papangelou,
)
from .models import (
    FAMILIES,
    KernelModel,
    K_function,
    L_function,
    alpha_max,
    cauchy_model,
    circular_model,
    delta_max,
    gaussian_model,
    generalized_gamma_model,
    kernel_value,
    model_from_dict,
    model_to_dict,
    most_repulsive_model,
    palm_kernel,
    parse_model_spec,
    pcf,
    power_exponential_model,
    range_of_correlation,
    repulsiveness_mu,
    rho_max,
    spectral_density,
    validate,
    whittle_matern_model,
)
from .sampler import (
    PoissonModel,
    ProjectionBasis,
    RngStream,
    rejection_draw,
    sample_bernoulli_set,
    sample_pattern,
    sample_poisson,
    sample_projection,
    simulate,
    thin,
    thin_split,
    transform,
)
from .spectral import (
    SpectralLattice,
    build_lattice,
    c_tilde_direct,
    c_tilde_grid,
    log_det_normalizer,
    periodic_kernel,
    truncated_mass,
    wm_error_bound,
)
from .stats import (
    EnvelopeBand,
    SummaryCurve,
    default_r_grid,
    envelopes,
    estimate_FGJ,
    estimate_K,
    estimate_L,
    estimate_pcf,
    fit_inhomogeneous_separable,
    fit_minimum_contrast,
    lr_test,
    random_labelling_test,
)

__all__ = [name for name in dir() if not name.startswith("_")]
