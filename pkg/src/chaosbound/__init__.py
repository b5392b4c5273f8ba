"""Spectral norm bounds for matrix chaoses via flattenings."""

from .bounds import (
    ALL_PROFILES,
    UPPER_PROFILES,
    BestBound,
    BoundProfile,
    Theorem,
    best_bound,
    bound_profile,
    distribution_params,
    golden_profiles,
    schema_profiles,
)
from .flattening import (
    ChaosParameters,
    FlatteningAssignment,
    FlatteningClass,
    FlatteningTable,
    build_table,
    chaos_parameters,
    enumerate_assignments,
    explicit_flattening,
    flattening_norm_sq,
    oracle_check,
)
from .graph import (
    Shape,
    edge_ordering,
    enumerate_shapes,
    graph_schema,
    materialize_graph_matrix,
    min_vertex_separator,
    norm_exponents,
    sigma_bound_check,
)
from .monomial import Monomial
from .sampler import (
    CapExceeded,
    Mode,
    SampleConfig,
    decoupling_ratio,
    materialize,
    monte_carlo,
    scaling_fit,
    spectral_norm,
)
from .schema import (
    ChaosSchema,
    DistributionSpec,
    ellipsoid_schemas,
    khatri_rao_schema,
    load_schema,
    tensor_pca_schemas,
    validate,
)

__version__ = "0.1.0"
