"""Active localization laboratory: Python bindings over the C++ core."""

from apfl._apfl import (  # noqa: F401
    DistanceField,
    EpisodeResult,
    FilterConfig,
    GradientReport,
    LidarScan,
    OccupancyGrid,
    OdomDelta,
    ParticleSet,
    Pose,
    Rng,
    StepRecord,
    compute_reward,
    distance_transform,
    estimate_pose,
    extract_local_map,
    extract_modes,
    generate_floorplan,
    gradient_check,
    load_map,
    parse_map,
    pose_log_likelihood,
    pose_loss,
    predict,
    project_particles,
    raycast,
    render_trajectory,
    run_episode,
    save_map,
    sense,
    soft_resample,
    update_weights,
    wrap_angle,
)

__all__ = [
    "DistanceField",
    "EpisodeResult",
    "FilterConfig",
    "GradientReport",
    "LidarScan",
    "OccupancyGrid",
    "OdomDelta",
    "ParticleSet",
    "Pose",
    "Rng",
    "StepRecord",
    "compute_reward",
    "distance_transform",
    "estimate_pose",
    "extract_local_map",
    "extract_modes",
    "generate_floorplan",
    "gradient_check",
    "load_map",
    "parse_map",
    "pose_log_likelihood",
    "pose_loss",
    "predict",
    "project_particles",
    "raycast",
    "render_trajectory",
    "run_episode",
    "save_map",
    "sense",
    "soft_resample",
    "update_weights",
    "wrap_angle",
]
