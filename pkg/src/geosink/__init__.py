"""Geodesic Sinkhorn: entropic optimal transport on data graphs with a
Chebyshev-filtered heat kernel."""

from .barycenter import (
    BarycenterResult,
    DistributionFamily,
    TransportParams,
    barycentric_distance,
    expected_barycenter_effect,
    sinkhorn_barycenter,
    tv_baseline_effect,
)
from .errors import (
    DegenerateInput,
    DegeneratePlan,
    DimensionMismatch,
    Disconnected,
    DuplicatePoints,
    FormatError,
    GeosinkError,
    IndexOutOfRange,
    KernelNotPositive,
    LengthMismatch,
    NegativeWeight,
    NonPositiveTime,
    NumericalError,
    NumericalUnderflow,
    SizeMismatch,
    SolveFailure,
    TooLarge,
    ValidationError,
)
from .graph import GraphLaplacian, estimate_lambda_max, knn_alpha_decay_graph, laplacian
from .heatfilter import (
    EulerFilter,
    HeatFilter,
    apply,
    apply_euler,
    build_filter,
    convergence_study,
    exact_heat_oracle,
)
from .transport import (
    TransportResult,
    dense_sinkhorn,
    exact_w2,
    geodesic_sinkhorn,
    indicator,
    mccann_interpolate,
    plan_row,
)

__version__ = "0.1.0"
