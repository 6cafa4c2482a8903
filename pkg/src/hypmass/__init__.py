"""Numerical mass integrals of asymptotically hyperbolic manifolds."""

from .backgrounds import (
    Background,
    StaticPotential,
    build_background,
    builtin_metric,
    bump_perturbation_metric,
    default_boundary,
    nb_basis,
    tensor_perturbation_metric,
    verify_static,
)
from .boundary import (
    BoundaryManifold,
    circle_boundary,
    flat_torus_boundary,
    hyperbolic_patch_boundary,
    sphere_boundary,
    sphere_volume,
)
from .conformal import (
    ConformalData,
    boundary_conditions_check,
    compactify,
    conformal_background,
    conformal_data_from_metric,
    decompactify,
    mass_from_conformal,
    metric_from_conformal,
)
from .errors import (
    BoundaryMismatchError,
    ConfigError,
    DegenerateMetricError,
    DivergentMassError,
    DomainError,
    HypmassError,
    UnknownBasisError,
)
from .gauge import (
    DecayReport,
    LorentzMap,
    apply_radial_gauge,
    decay_report,
    gauge_monotonicity_bound,
    lorentz_act,
    predicted_gauge_mass,
    radial_reparametrize,
)
from .geometry import DerivativeScheme, MetricField, Point, ScalarField
from .mass import (
    DEFAULT_RADII,
    ExtrapolationResult,
    FluxSample,
    MassResult,
    MomentumCovector,
    classify_covector,
    flux_at_radius,
    flux_samples,
    identity_residual,
    invariant_mass,
    linearized_mass,
    mass_integrand,
    alt_mass_integrand,
    mass_limit,
    momentum_vector,
)

__version__ = "0.1.0"
