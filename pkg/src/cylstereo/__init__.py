"""Size distributions of oriented cylinders from planar rectangle profiles.

Cylinders with parallel axes are cut by a plane parallel to the axes.
Each cut cylinder shows up as a rectangle with squared half-width ``Z`` and
height ``H``; from a sample of such pairs this package estimates the
distributions of squared radius, aspect ratio, surface area and volume,
the height distribution, moments and the radius-height covariance, with
pointwise confidence intervals.
"""

from .asymptotics import (
    BandwidthConfig,
    EstimateWithCI,
    LowCountWarning,
    ci,
    tau_hat,
    var_cdf_isotonic,
    var_cdf_plugin,
    var_covariance,
    var_height_cdf,
    var_moment,
    xi_hat,
)
from .geometry import (
    CylinderSample,
    DomainError,
    EmptyObservationError,
    Observation,
    ObservationSet,
    QuantityKind,
    SingularityError,
    p_dot,
    p_transform,
    q_dot,
    q_transform,
    validate,
)
from .isotonic import (
    IntegratedCurve,
    IsotonicFit,
    MonotoneCurve,
    fit_isotonic,
    integrated_curve,
    isotonic_cdf,
    least_concave_majorant,
    n_hat,
    pava_decreasing,
    u_n,
)
from .kernels import BACKEND
from .plugin import (
    Moment,
    MomentSet,
    PluginCdf,
    PoleError,
    avoid_poles,
    covariance_hat,
    height_cdf_unweighted,
    height_cdf_weighted,
    moments,
    n_tilde,
    plugin_cdf,
)
from .simulation import (
    SimulationSpec,
    SliceWorld,
    analytic_F_V,
    run_table3,
    sample_2d_direct,
    sample_3d,
    slice_oracle,
    true_covariance,
    true_nu2,
)

__version__ = "0.1.0"
