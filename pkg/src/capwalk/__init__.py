"""capwalk: discrete potential theory of the simple random walk on Z^3."""

from ._version import __version__  # noqa: F401

from .capacity import (  # noqa: F401
    BallCapacity,
    EquilibriumMeasure,
    PointSet,
    ball_capacity,
    ball_points,
    capacity_bounds,
    capacity_exact,
    equilibrium_measure,
    escape_probability,
    incremental_capacity,
    point_set,
    union_capacity_upper,
)
from .errors import (  # noqa: F401
    CapwalkError,
    ConfigError,
    DomainError,
    NumericError,
    ResourceError,
)
from .green import (  # noqa: F401
    GreenTable,
    build_green_table,
    default_table,
    green,
    green_dp_extrapolated,
    green_dp_oracle,
    green_quadrature,
)
from .walk import (  # noqa: F401
    BallCover,
    WalkPath,
    ball_cover,
    concat,
    diameter,
    fresh_points,
    from_steps,
    simulate_bridge,
    simulate_srw,
)
from .estimator import (  # noqa: F401
    CapEstimate,
    GreenSumProfile,
    capacity_mc,
    capacity_mc_subsampled,
    green_sum_profile,
)
from .asymptotics import (  # noqa: F401
    CorridorSpec,
    MultiPointSpec,
    Normalizers,
    Trajectory,
    check_corridor,
    check_multipoint_E,
    check_multipoint_F,
    holder_check,
    isotonic_fit,
    membership_S,
    normalizers,
    rate_K,
    rate_S,
    trajectory,
)
from .constructions import (  # noqa: F401
    EventReport,
    PathBlueprint,
    check_construction_events,
    cube_blueprint,
    realize_bridges,
    realize_deterministic,
    sphere_blueprint,
)
from .experiments import (  # noqa: F401
    ExperimentConfig,
    ResultRecord,
    load_config,
    regime_predicates,
    run_suite,
    write_records,
)
