"""Voxel potential-field navigation toolkit.

Guidance fields over 3D occupancy grids (geodesic attraction, signed-distance
repulsion, priority-weighted body-part queries), a von Mises-Fisher motion
prior and reward, procedural scene generation with a difficulty curriculum,
a kinematic field-following agent with traversal metrics, and a click-to-
navigate teleoperation server.
"""

from .errors import (
    ArityError,
    CapacityError,
    ConfigError,
    DomainError,
    FieldNavError,
    InvalidGoalError,
    SceneRejectedError,
    ValidationError,
)
from .field import (
    BodyPartState,
    FieldParams,
    FieldQuery,
    GuidanceField,
    attractive_potential,
    build_field,
    collision_urgency,
    field_observation,
    geodesic_field,
    query_guidance,
    repulsive_potential,
    root_weight,
)
from .grid import (
    GridSpec,
    OccupancyGrid,
    OrientedBox,
    ScalarField,
    VectorField,
    gradient_central,
    load_field,
    morph_close,
    morph_dilate,
    morph_erode,
    morph_open,
    rasterize_boxes,
    sample_trilinear,
    save_field,
    signed_distance,
    squared_edt,
)
from .scene import (
    PerlinConfig,
    SceneGenConfig,
    SceneManifest,
    certify_traversable,
    cleanup,
    deform_and_rasterize,
    erode_walkable,
    generate_boxes,
    generate_scene,
    load_manifest,
    manifest_to_grid,
    perlin2,
    sample_start_goal,
    save_manifest,
)
from .sim import (
    AgentModel,
    AgentState,
    RolloutConfig,
    RolloutResult,
    check_collision,
    default_agent,
    derive_parts,
    dilemma_scenario,
    evaluate,
    run_rollout,
    step_follower,
    write_trace,
)
from .vmf import (
    MotionSample,
    VmfPrior,
    derive_prior,
    log_likelihood_reward,
    log_vmf_normalizer,
    motion_sample,
    vmf_log_density,
)

__version__ = "0.1.0"
