"""Vectorized HD map completion from partial map priors.

Geometry and scene files, prior scenarios, prior-aware query sets, assignment
with pre-attribution, the completion metric and reference baselines.
"""
from .assignment import (
    AssignmentResult,
    CostConfig,
    Prediction,
    assign_with_preattribution,
    cost_matrix,
    hungarian,
    match_cost,
)
from .geometry import (
    CLASS_ORDER,
    BevRange,
    GeometryError,
    MapClass,
    MapElement,
    VectorMap,
    chamfer,
    clip_to_bev,
    resample,
    resample_points,
)
from .metrics import MetricConfig, PriorHandling, average_precision, completion_ap, completion_ap_dataset
from .priors import (
    ALL_SCENARIOS,
    BENCHMARK_SCENARIOS,
    PriorParams,
    PriorScenario,
    Regime,
    RegimeConfig,
    ScenarioId,
    apply_prior,
    build_scenario_set,
)
from .queries import Design, EmbeddingTables, Encoder, QueryConfig, QuerySet, build_query_set
from .scene_io import Scene, SynthConfig, generate_synthetic, load_scene, save_scene

__version__ = "0.1.0"
