"""Kinematic field-following agent, rollouts, and traversal metrics.

The follower is a 4-DoF proxy (planar root, crouch, lateral lean) carrying 13
spherical probe parts from feet to head.  It steers along the sampled
guidance-field direction at the root, crouches against downward field
pressure on its upper parts, and leans with the lateral pressure on its mid
parts.  It exists to verify field quality: a scene counts as traversed when
the root reaches the goal disc in time without any probe ever intersecting
an obstacle.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SceneRejectedError, ValidationError
from .field import (
    BodyPartState,
    FieldParams,
    FieldQuery,
    GuidanceField,
    build_field,
    query_guidance,
)
from .grid import OccupancyGrid
from .scene import (
    STREAM_TRIALS,
    PerlinConfig,
    SceneGenConfig,
    SceneManifest,
    certify_traversable,
    erode_walkable,
    manifest_to_grid,
    sample_start_goal,
)
from .vmf import derive_prior, log_likelihood_reward, motion_sample

THREADS_ENV = "FIELDNAV_THREADS"

_PART_TABLE = [
    # name, forward, left, up (relative to root), radius
    ("pelvis", 0.00, 0.00, 0.000, 0.10),
    ("foot_l", 0.00, 0.10, -0.625, 0.06),
    ("foot_r", 0.00, -0.10, -0.625, 0.06),
    ("knee_l", 0.00, 0.10, -0.350, 0.07),
    ("knee_r", 0.00, -0.10, -0.350, 0.07),
    ("hip_l", 0.00, 0.12, -0.050, 0.08),
    ("hip_r", 0.00, -0.12, -0.050, 0.08),
    ("torso", 0.00, 0.00, 0.250, 0.10),
    ("shoulder_l", 0.00, 0.18, 0.400, 0.07),
    ("shoulder_r", 0.00, -0.18, 0.400, 0.07),
    ("elbow_l", 0.00, 0.22, 0.250, 0.06),
    ("elbow_r", 0.00, -0.22, 0.250, 0.06),
    ("head", 0.00, 0.00, 0.600, 0.09),
]


@dataclass(frozen=True)
class AgentModel:
    """Geometry and limits of the kinematic probe agent."""

    part_names: tuple
    part_offsets: np.ndarray  # (K, 3): forward, left, up relative to the root
    part_radii: np.ndarray
    root_index: int = 0
    root_height: float = 0.7
    crouch_range: tuple[float, float] = (0.9, 1.3)
    max_speed: float = 1.0
    max_crouch_rate: float = 0.6  # m/s at the head
    max_lateral_offset: float = 0.12
    max_lean_rate: float = 0.3
    clearance_radius: float = 0.25
    safety_margin: float = 0.12
    max_turn_rate: float = 2.0 * np.pi  # rad/s, heading slew limit
    crouch_gain: float = 6.0
    crouch_deadband: float = 0.05
    crouch_restore: float = 2.0
    lean_gain: float = 2.0
    lean_restore: float = 2.0

    def __post_init__(self):
        object.__setattr__(
            self, "part_offsets", np.asarray(self.part_offsets, dtype=np.float64)
        )
        object.__setattr__(
            self, "part_radii", np.asarray(self.part_radii, dtype=np.float64)
        )
        if self.part_offsets.shape != (self.num_parts, 3):
            raise ValidationError("part_offsets must be (K, 3)")
        if np.any(self.part_radii <= 0):
            raise ValidationError("part radii must be positive")
        if not 0 < self.crouch_range[0] < self.crouch_range[1]:
            raise ValidationError("crouch_range must be 0 < min < max")

    @property
    def num_parts(self) -> int:
        return len(self.part_names)

    @property
    def max_height(self) -> float:
        return self.crouch_range[1]

    @property
    def min_height_scale(self) -> float:
        return self.crouch_range[0] / self.crouch_range[1]

    def nominal_heights(self) -> np.ndarray:
        return self.root_height + self.part_offsets[:, 2]

    def upper_part_ids(self) -> np.ndarray:
        return np.flatnonzero(self.nominal_heights() >= 0.9)

    def mid_part_ids(self) -> np.ndarray:
        z = self.nominal_heights()
        return np.flatnonzero((z >= 0.6) & (z <= 1.2))


def default_agent(**overrides) -> AgentModel:
    """The 13-part desk-scale agent (1.3 m standing, feet to head)."""
    names = tuple(row[0] for row in _PART_TABLE)
    offsets = np.array([row[1:4] for row in _PART_TABLE])
    radii = np.array([row[4] for row in _PART_TABLE])
    return AgentModel(part_names=names, part_offsets=offsets, part_radii=radii, **overrides)


@dataclass
class AgentState:
    """Pose plus the rates needed to differentiate the part map."""

    root_xy: np.ndarray
    heading: np.ndarray
    height_scale: float = 1.0
    lateral_lean: float = 0.0
    root_vel: np.ndarray = field(default_factory=lambda: np.zeros(2))
    crouch_rate: float = 0.0  # d(height_scale)/dt
    lean_rate: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        self.root_xy = np.asarray(self.root_xy, dtype=np.float64)
        self.heading = np.asarray(self.heading, dtype=np.float64)
        self.root_vel = np.asarray(self.root_vel, dtype=np.float64)
        n = np.linalg.norm(self.heading)
        if n == 0:
            raise ValidationError("heading must be non-zero")
        self.heading = self.heading / n

    def copy(self) -> "AgentState":
        return AgentState(
            root_xy=self.root_xy.copy(),
            heading=self.heading.copy(),
            height_scale=self.height_scale,
            lateral_lean=self.lateral_lean,
            root_vel=self.root_vel.copy(),
            crouch_rate=self.crouch_rate,
            lean_rate=self.lean_rate,
            t=self.t,
        )


def derive_parts(model: AgentModel, state: AgentState) -> list[BodyPartState]:
    """Realize part positions/velocities from the 4-DoF state.

    Positions: root + forward/left offsets in the heading frame, the lean
    shifted along the left axis proportionally to nominal height, and all
    heights scaled by the crouch factor.  Velocities differentiate the same
    map holding the heading fixed.
    """
    left = np.array([-state.heading[1], state.heading[0]])
    z_nom = model.nominal_heights()
    lean_w = z_nom / model.max_height
    parts = []
    for k in range(model.num_parts):
        fwd, lat, _ = model.part_offsets[k]
        xy = (
            state.root_xy
            + state.heading * fwd
            + left * (lat + state.lateral_lean * lean_w[k])
        )
        z = state.height_scale * z_nom[k]
        vel_xy = state.root_vel + left * (state.lean_rate * lean_w[k])
        vel_z = state.crouch_rate * z_nom[k]
        parts.append(
            BodyPartState(
                part_id=k,
                position=np.array([xy[0], xy[1], z]),
                velocity=np.array([vel_xy[0], vel_xy[1], vel_z]),
                is_root=(k == model.root_index),
                radius=float(model.part_radii[k]),
            )
        )
    return parts


def query_parts(fld: GuidanceField, parts) -> list[FieldQuery]:
    return [query_guidance(fld, p) for p in parts]


def step_follower(
    fld: GuidanceField,
    model: AgentModel,
    state: AgentState,
    dt: float,
    queries: list[FieldQuery] | None = None,
    reverse: bool = False,
) -> AgentState:
    """Advance one control step along the queried field.

    The root walks at the model's maximum speed along the horizontal
    direction of the summed weighted part vectors, so parts close to a
    collision (large urgency weight) steer the whole body away from what they
    are about to hit; a degenerate field sums to zero and the agent holds.
    Crouch follows the mean downward field pressure on the upper parts with a
    restoring pull toward standing; lean follows the mean lateral pressure on
    the mid parts.  All rates are clamped by the model limits.  Deterministic
    given its inputs.
    """
    if not 0.0 < dt <= 0.1:
        raise ValidationError("dt must lie in (0, 0.1]")
    if queries is None:
        queries = query_parts(fld, derive_parts(model, state))
    left = np.array([-state.heading[1], state.heading[0]])

    steer = np.sum([q.vector for q in queries], axis=0)
    if reverse:
        steer = -steer
    horiz = steer[:2]
    hn = np.linalg.norm(horiz)
    new_vel = model.max_speed * horiz / hn if hn > 1e-9 else np.zeros(2)

    # Safety filter: parts close to contact project the inward velocity
    # component out (fully below the hard floor), so probes slide along
    # surfaces instead of penetrating; inside the hard band they also get an
    # outward escape nudge.
    if hn > 1e-9:
        hard = 0.4 * model.safety_margin
        positions = np.array([q.part.position for q in queries])
        d = fld.sdf.sample(positions)
        grads = fld.sdf_grad.sample(positions)
        clearance = d - model.part_radii
        correction = np.zeros(2)
        for k in range(len(queries)):
            c = clearance[k]
            if c >= model.safety_margin:
                continue
            away = grads[k][:2]
            nn = np.linalg.norm(away)
            if nn < 1e-9:
                continue
            away = away / nn
            inward = float(new_vel @ away)
            if inward < 0.0:
                keep = np.clip((c - hard) / (model.safety_margin - hard), 0.0, 1.0)
                correction = correction - (1.0 - keep) * inward * away
            if c < hard:
                correction = correction + 0.3 * model.max_speed * (1.0 - c / hard) * away
        # Corrections are accumulated against the uncorrected velocity and
        # applied at once, so mirror-symmetric constraints cancel exactly.
        new_vel = new_vel + correction

    # Suppress float-noise components: a perfectly balanced configuration
    # must not drift off its symmetry plane, so sub-1e-9 velocity components
    # are treated as the exact zeros they would be in real arithmetic.
    new_vel = np.where(np.abs(new_vel) < 1e-9 * model.max_speed, 0.0, new_vel)
    over = np.linalg.norm(new_vel)
    if over > model.max_speed:
        new_vel = new_vel * (model.max_speed / over)

    # The placement frame turns smoothly toward the walking direction (an
    # exact reversal keeps the current heading), so heading-mounted parts
    # never jump between steps even when the commanded velocity flips.
    speed = np.linalg.norm(new_vel)
    heading = state.heading
    if speed > 0:
        desired = new_vel / speed
        cos_ang = float(np.clip(heading @ desired, -1.0, 1.0))
        angle = float(np.arccos(cos_ang))
        max_step = model.max_turn_rate * dt
        if angle <= max_step:
            heading = desired
        elif angle < np.pi - 1e-9:
            sign = 1.0 if heading[0] * desired[1] - heading[1] * desired[0] >= 0 else -1.0
            c, s = np.cos(sign * max_step), np.sin(sign * max_step)
            heading = np.array(
                [c * heading[0] - s * heading[1], s * heading[0] + c * heading[1]]
            )

    upper = model.upper_part_ids()
    down = -float(np.mean([min(0.0, queries[i].vector[2]) for i in upper]))
    if down < model.crouch_deadband:
        down = 0.0
    hs_rate = -model.crouch_gain * down + model.crouch_restore * (1.0 - state.height_scale)
    rate_cap = model.max_crouch_rate / model.max_height
    hs_rate = float(np.clip(hs_rate, -rate_cap, rate_cap))
    hs_new = float(
        np.clip(state.height_scale + hs_rate * dt, model.min_height_scale, 1.0)
    )

    mid = model.mid_part_ids()
    left3 = np.array([left[0], left[1], 0.0])
    lateral = float(np.mean([queries[i].vector @ left3 for i in mid]))
    if abs(lateral) < 1e-9:
        # Same noise floor as the velocity: exact lateral balance must not
        # leak into the lean integrator and re-seed an off-plane drift.
        lateral = 0.0
    lean_rate = model.lean_gain * lateral - model.lean_restore * state.lateral_lean
    lean_rate = float(np.clip(lean_rate, -model.max_lean_rate, model.max_lean_rate))
    lean_new = float(
        np.clip(
            state.lateral_lean + lean_rate * dt,
            -model.max_lateral_offset,
            model.max_lateral_offset,
        )
    )

    return AgentState(
        root_xy=state.root_xy + new_vel * dt,
        heading=heading,
        height_scale=hs_new,
        lateral_lean=lean_new,
        root_vel=new_vel,
        crouch_rate=(hs_new - state.height_scale) / dt,
        lean_rate=(lean_new - state.lateral_lean) / dt,
        t=state.t + dt,
    )


def check_collision(fld: GuidanceField, parts) -> bool:
    """True when any part's sampled signed distance drops below its radius."""
    positions = np.array([p.position for p in parts])
    d = fld.sdf.sample(positions)
    radii = np.array([p.radius for p in parts])
    return bool(np.any(d < radii))


# ---------------------------------------------------------------------------
# Rollouts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RolloutConfig:
    dt: float = 0.02
    time_limit: float = 5.0
    success_radius: float = 0.1
    stall_window: float = 1.0
    stall_tol: float = 1e-4
    reverse_field: bool = False

    def __post_init__(self):
        if not 0.0 < self.dt <= 0.1:
            raise ValidationError("dt must lie in (0, 0.1]")
        if self.time_limit <= 0 or self.success_radius <= 0:
            raise ValidationError("time_limit and success_radius must be positive")


@dataclass
class StepRecord:
    t: float
    state: AgentState
    queries: list[FieldQuery]
    reward: float


@dataclass
class RolloutResult:
    success: bool
    collided: bool
    time_used: float
    de: float
    trajectory: list[StepRecord]
    termination: str  # reached | timeout | collision | stalled

    def __post_init__(self):
        if self.success and (self.collided or self.termination != "reached"):
            raise ValidationError("success implies a collision-free reach")


def _step_reward(queries, parts) -> float:
    priors = [derive_prior(q) for q in queries]
    samples = [motion_sample(p.velocity) for p in parts]
    return log_likelihood_reward(priors, samples)


def run_rollout(
    manifest: SceneManifest,
    model: AgentModel,
    params: FieldParams,
    cfg: RolloutConfig | None = None,
    grid: OccupancyGrid | None = None,
    fld: GuidanceField | None = None,
    start=None,
    goal=None,
) -> RolloutResult:
    """Follow the field from start to goal on a static scene.

    Terminates on: the 2D root-goal distance dropping inside the success
    radius (reached), any probe collision, the time limit (scaled with the
    straight-line distance for goals beyond 5 m), or the root moving less
    than the stall tolerance over the stall window.  de is the closest 2D
    approach over the whole trajectory.
    """
    cfg = cfg or RolloutConfig()
    if grid is None:
        grid = manifest_to_grid(manifest)
    start = np.asarray(manifest.start if start is None else start, dtype=np.float64)
    goal = np.asarray(manifest.goal if goal is None else goal, dtype=np.float64)
    if fld is None:
        fld = build_field(grid, goal, params)

    to_goal = goal[:2] - start[:2]
    dist0 = float(np.linalg.norm(to_goal))
    heading = to_goal / dist0 if dist0 > 1e-12 else np.array([1.0, 0.0])
    limit = cfg.time_limit * max(1.0, dist0 / 5.0)

    state = AgentState(root_xy=start[:2].copy(), heading=heading)
    trajectory: list[StepRecord] = []
    window: list[tuple[float, np.ndarray]] = []
    de = np.inf
    termination = "timeout"
    collided = False

    while True:
        parts = derive_parts(model, state)
        queries = query_parts(fld, parts)
        reward = _step_reward(queries, parts)
        trajectory.append(StepRecord(state.t, state.copy(), queries, reward))
        dist = float(np.linalg.norm(state.root_xy - goal[:2]))
        de = min(de, dist)

        if check_collision(fld, parts):
            collided = True
            termination = "collision"
            break
        if dist <= cfg.success_radius:
            termination = "reached"
            break
        if state.t >= limit:
            termination = "timeout"
            break
        window.append((state.t, state.root_xy.copy()))
        while window and window[0][0] < state.t - cfg.stall_window - 1e-12:
            window.pop(0)
        if (
            state.t - window[0][0] >= cfg.stall_window - 1e-12
            and np.linalg.norm(state.root_xy - window[0][1]) < cfg.stall_tol
        ):
            termination = "stalled"
            break
        state = step_follower(fld, model, state, cfg.dt, queries, cfg.reverse_field)

    return RolloutResult(
        success=(termination == "reached" and not collided),
        collided=collided,
        time_used=state.t,
        de=float(de),
        trajectory=trajectory,
        termination=termination,
    )


# ---------------------------------------------------------------------------
# The symmetric-dilemma scenario
# ---------------------------------------------------------------------------


def dilemma_scenario() -> SceneManifest:
    """A wall dead ahead, mirror-symmetric about the start-goal line.

    The wall spans floor to ceiling with equal gaps on both sides, so the
    lateral field components cancel exactly on the symmetry plane.  The room
    is 101 cells wide in y, putting the symmetry plane through a cell-centre
    row (the goal voxel sits exactly on it), and surface noise is disabled;
    together these preserve the mirror symmetry at voxel level.
    """
    from .grid import OrientedBox

    axis_y = 2.525
    # Extents avoid landing exactly on cell-centre boundaries so the
    # inclusive rasterization cannot tip one mirror side but not the other.
    wall = OrientedBox(
        center=np.array([2.5, axis_y, 1.1]),
        half_extents=np.array([0.08, 0.76, 1.1]),
        rotation=np.eye(3),
        anchor="floor",
    )
    return SceneManifest(
        seed=0,
        difficulty=0.5,
        room=(5.0, 5.05, 2.2),
        resolution=0.05,
        boxes=[wall],
        perlin=PerlinConfig(amplitude=0.0),
        morph_radius_vox=1,
        start=np.array([1.7, axis_y, 0.7]),
        goal=np.array([3.3, axis_y, 0.7]),
    )


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _trial_start_goal(manifest, grid, trial, cfg: SceneGenConfig):
    """Trial 0 replays the manifest pair; later trials resample and certify."""
    if trial == 0:
        return manifest.start, manifest.goal
    spec = manifest.grid_spec()
    mask = erode_walkable(grid, cfg.agent_clearance + cfg.resolution, cfg.stand_band)
    for retry in range(16):
        try:
            start, goal = sample_start_goal(
                mask,
                spec,
                seed=manifest.seed,
                circle_radius=cfg.goal_circle,
                height=cfg.start_height,
                stream=STREAM_TRIALS,
                attempt=trial * 16 + retry,
            )
        except SceneRejectedError:
            break
        if certify_traversable(grid, start, goal, cfg.agent_clearance):
            return start, goal
    return manifest.start, manifest.goal


def evaluate(
    scenes,
    model: AgentModel,
    params: FieldParams,
    cfg: RolloutConfig | None = None,
    trials: int = 1,
    scene_cfg: SceneGenConfig | None = None,
) -> dict:
    """Run trials over many scenes and aggregate success rate and distance error.

    SR is the percentage of successful trials; de_mean averages every trial's
    closest approach.  Scenes run in parallel up to the FIELDNAV_THREADS cap,
    with per-trial determinism preserved by seeded resampling.
    """
    scenes = list(scenes)
    if not scenes:
        raise ValidationError("need at least one scene")
    cfg = cfg or RolloutConfig()
    scene_cfg = scene_cfg or SceneGenConfig()

    def one_scene(manifest: SceneManifest) -> dict:
        grid = manifest_to_grid(manifest)
        rows = []
        for trial in range(trials):
            start, goal = _trial_start_goal(manifest, grid, trial, scene_cfg)
            result = run_rollout(
                manifest, model, params, cfg, grid=grid, start=start, goal=goal
            )
            rows.append(
                {
                    "trial": trial,
                    "success": result.success,
                    "de": result.de,
                    "time_used": result.time_used,
                    "termination": result.termination,
                }
            )
        return {
            "seed": manifest.seed,
            "difficulty": manifest.difficulty,
            "trials": rows,
        }

    n_threads = _threads()
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            per_scene = list(pool.map(one_scene, scenes))
    else:
        per_scene = [one_scene(m) for m in scenes]

    all_rows = [row for entry in per_scene for row in entry["trials"]]
    successes = sum(1 for r in all_rows if r["success"])
    return {
        "sr": 100.0 * successes / len(all_rows),
        "de_mean": float(np.mean([r["de"] for r in all_rows])),
        "per_scene": per_scene,
    }


# ---------------------------------------------------------------------------
# Trace and summary export
# ---------------------------------------------------------------------------


def write_trace(path, result: RolloutResult) -> None:
    """One JSON record per step: pose, per-part weighted vectors, reward."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in result.trajectory:
            fh.write(
                json.dumps(
                    {
                        "t": rec.t,
                        "root_xy": rec.state.root_xy.tolist(),
                        "height_scale": rec.state.height_scale,
                        "lean": rec.state.lateral_lean,
                        "parts": [
                            {
                                "pos": q.part.position.tolist(),
                                "f_h": q.vector.tolist(),
                                "kappa": q.kappa,
                            }
                            for q in rec.queries
                        ],
                        "r_field": rec.reward,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def write_summary(path, summary: dict) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def write_summary_csv(path, summary: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "difficulty", "trial", "success", "de", "time_used", "termination"])
        for entry in summary["per_scene"]:
            for row in entry["trials"]:
                writer.writerow(
                    [
                        entry["seed"],
                        entry["difficulty"],
                        row["trial"],
                        int(row["success"]),
                        f"{row['de']:.6f}",
                        f"{row['time_used']:.3f}",
                        row["termination"],
                    ]
                )
