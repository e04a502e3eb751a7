"""Networked device-free sensing toolkit.

Link-budget coverage, waveform ambiguity analysis, multistatic localization,
range data association with ghost-target detection, IRS-assisted ranging,
and reproducible Monte Carlo experiment harnesses.
"""

from .association import (
    AssociationHypothesis,
    AssociationSolution,
    DistanceProfile,
    GhostProbabilityResult,
    GhostReport,
    build_ghost_report,
    enumerate_feasible,
    exact_profiles,
    ghost_probability,
    solve_association,
    solve_association_bnb,
)
from .errors import (
    BehindRayError,
    GeometryError,
    InconsistentMeasurementError,
    InfeasibleAssociationError,
    InvalidRootError,
    NetsenseError,
    NoIntersectionError,
    SceneGenerationError,
    UnequalCardinalityError,
)
from .harness import (
    ExperimentReport,
    ExperimentSpec,
    MeasurementSet,
    NoiseModel,
    RandomScenePlan,
    measure_distances,
    run_accuracy_experiment,
    run_uniqueness_experiment,
)
from .irs import (
    IrsPathMeasurement,
    irs_target_distance,
    localize_with_heterogeneous_anchors,
    synthesize_path_measurement,
)
from .link_budget import (
    LinkBudgetParams,
    SnrResult,
    covered,
    db_to_linear,
    guard_interval,
    linear_to_db,
    max_sensing_range,
    range_resolution,
    sensing_snr,
)
from .localization import (
    PositionEstimate,
    RangeMeasurement,
    circle_intersections,
    range_jacobian,
    range_residuals,
    solve_ranges,
    solve_ranges_batch,
    triangulate,
    trilaterate,
)
from .scene import (
    Anchor,
    AnchorKind,
    Bounds,
    Point2,
    Scene,
    Target,
    ValidationReport,
    load_scene,
    random_scene,
    save_scene,
    scene_from_dict,
    scene_to_dict,
    true_distance,
    validate_scene,
)
from .waveforms import (
    AmbiguitySurface,
    ComplexSequence,
    SidelobeMetrics,
    ambiguity,
    ofdm_symbol,
    sidelobe_metrics,
    zadoff_chu,
)

__version__ = "0.1.0"
