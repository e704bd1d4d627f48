"""Hybrid procedural scene generation with a difficulty curriculum.

Scenes are rooms populated by oriented boxes that extend up from the floor,
hang from the ceiling, or float mid-air, optionally forming a narrow lateral
passage.  Box surfaces are displaced by seeded 2D gradient noise, rasterized,
and cleaned up with voxel morphology.  A scalar difficulty in [0, 1] controls
box count, box size, and traversal clearances.  Everything is a pure function
of (seed, difficulty, config): identical inputs give byte-identical manifests
and grids.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SceneRejectedError, ValidationError
from .field import geodesic_field
from .grid import (
    GridSpec,
    OccupancyGrid,
    OrientedBox,
    morph_close,
    morph_dilate,
    morph_open,
    squared_edt,
)

SCENE_SCHEMA = 1

# Independent RNG stream ids, keyed together with the scene seed.
STREAM_BOXES = 0
STREAM_START_GOAL = 1
STREAM_TRIALS = 2

_DRAWS_PER_BOX = 12


@dataclass(frozen=True)
class PerlinConfig:
    amplitude: float = 0.05
    cell_size: float = 0.4
    octaves: int = 2

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValidationError("cell_size must be positive")
        if self.octaves < 1:
            raise ValidationError("octaves must be >= 1")
        if self.amplitude < 0:
            raise ValidationError("amplitude must be >= 0")


@dataclass(frozen=True)
class SceneGenConfig:
    """Generator knobs; clearance schedules interpolate easy -> hard."""

    room: tuple[float, float, float] = (5.0, 5.0, 2.2)
    resolution: float = 0.05
    n_min: int = 2
    n_max: int = 14
    perlin: PerlinConfig = field(default_factory=PerlinConfig)
    morph_radius_vox: int = 1
    walk_erode_radius: float = 0.1
    stand_band: float = 1.9
    crouch_band: float = 1.05
    goal_circle: float = 2.0
    start_height: float = 0.7
    agent_clearance: float = 0.25
    max_attempts: int = 32
    # (easy_low, easy_high, hard_low, hard_high) in meters
    passage_sched: tuple = (0.9, 1.4, 0.45, 0.8)
    overhead_sched: tuple = (1.6, 1.9, 1.1, 1.4)
    hurdle_sched: tuple = (0.05, 0.15, 0.2, 0.4)

    def grid_spec(self) -> GridSpec:
        dims = tuple(int(round(e / self.resolution)) for e in self.room)
        return GridSpec(np.zeros(3), self.resolution, dims)


@dataclass
class SceneManifest:
    """Serializable description of one generated scene."""

    seed: int
    difficulty: float
    room: tuple[float, float, float]
    resolution: float
    boxes: list
    perlin: PerlinConfig
    morph_radius_vox: int
    start: np.ndarray
    goal: np.ndarray

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=np.float64)
        self.goal = np.asarray(self.goal, dtype=np.float64)
        if not 0.0 <= self.difficulty <= 1.0:
            raise ValidationError("difficulty must lie in [0, 1]")
        room = np.asarray(self.room, dtype=np.float64)
        for name, p in (("start", self.start), ("goal", self.goal)):
            if np.any(p < 0) or np.any(p > room):
                raise ValidationError(f"{name} {p.tolist()} outside the room")

    def grid_spec(self) -> GridSpec:
        dims = tuple(int(round(e / self.resolution)) for e in self.room)
        return GridSpec(np.zeros(3), self.resolution, dims)

    def to_dict(self) -> dict:
        return {
            "scene_schema": SCENE_SCHEMA,
            "seed": int(self.seed),
            "difficulty": float(self.difficulty),
            "room": [float(v) for v in self.room],
            "resolution": float(self.resolution),
            "boxes": [
                {
                    "center": box.center.tolist(),
                    "half_extents": box.half_extents.tolist(),
                    "rotation": box.rotation.tolist(),
                    "anchor": box.anchor,
                }
                for box in self.boxes
            ],
            "perlin": {
                "amplitude": self.perlin.amplitude,
                "cell_size": self.perlin.cell_size,
                "octaves": self.perlin.octaves,
            },
            "morph_radius_vox": int(self.morph_radius_vox),
            "start": self.start.tolist(),
            "goal": self.goal.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "SceneManifest":
        known = {
            "scene_schema",
            "seed",
            "difficulty",
            "room",
            "resolution",
            "boxes",
            "perlin",
            "morph_radius_vox",
            "start",
            "goal",
        }
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown manifest keys: {sorted(unknown)}")
        if data.get("scene_schema") != SCENE_SCHEMA:
            raise ValidationError(
                f"unsupported scene_schema {data.get('scene_schema')!r}"
            )
        boxes = []
        for b in data["boxes"]:
            extra = set(b) - {"center", "half_extents", "rotation", "anchor"}
            if extra:
                raise ValidationError(f"unknown box keys: {sorted(extra)}")
            boxes.append(
                OrientedBox(
                    np.array(b["center"]),
                    np.array(b["half_extents"]),
                    np.array(b["rotation"]),
                    b.get("anchor", "mid"),
                )
            )
        p = data["perlin"]
        extra = set(p) - {"amplitude", "cell_size", "octaves"}
        if extra:
            raise ValidationError(f"unknown perlin keys: {sorted(extra)}")
        return cls(
            seed=int(data["seed"]),
            difficulty=float(data["difficulty"]),
            room=tuple(data["room"]),
            resolution=float(data["resolution"]),
            boxes=boxes,
            perlin=PerlinConfig(**p),
            morph_radius_vox=int(data["morph_radius_vox"]),
            start=np.array(data["start"]),
            goal=np.array(data["goal"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "SceneManifest":
        return cls.from_dict(json.loads(text))


def save_manifest(path, manifest: SceneManifest) -> None:
    Path(path).write_text(manifest.to_json(), encoding="utf-8")


def load_manifest(path) -> SceneManifest:
    return SceneManifest.from_json(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Seeded 2D gradient noise
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def _mix(*values: int) -> int:
    """splitmix64-style avalanche over a tuple of integers."""
    h = 0x9E3779B97F4A7C15
    for v in values:
        h = (h ^ (int(v) & _MASK64)) * 0xBF58476D1CE4E5B9 & _MASK64
        h ^= h >> 31
        h = h * 0x94D049BB133111EB & _MASK64
        h ^= h >> 29
    return h


def _lattice_hash(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    # Modular uint64 arithmetic: wraparound is the point.
    with np.errstate(over="ignore"):
        h = (ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)) ^ (
            iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
        )
        h ^= np.uint64(_mix(seed))
        h = (h ^ (h >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        h = (h ^ (h >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return h ^ (h >> np.uint64(31))


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def _grad_dot(ix, iy, dx, dy, seed):
    h = _lattice_hash(ix, iy, seed)
    angle = (h >> np.uint64(11)).astype(np.float64) * (2.0 * np.pi / float(1 << 53))
    return np.cos(angle) * dx + np.sin(angle) * dy


def _perlin2_base(x: np.ndarray, y: np.ndarray, seed: int) -> np.ndarray:
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    u = _fade(fx)
    v = _fade(fy)
    n00 = _grad_dot(x0, y0, fx, fy, seed)
    n10 = _grad_dot(x0 + 1, y0, fx - 1.0, fy, seed)
    n01 = _grad_dot(x0, y0 + 1, fx, fy - 1.0, seed)
    n11 = _grad_dot(x0 + 1, y0 + 1, fx - 1.0, fy - 1.0, seed)
    nx0 = n00 + u * (n10 - n00)
    nx1 = n01 + u * (n11 - n01)
    return nx0 + v * (nx1 - nx0)


def perlin2(x, y, seed: int, cell_size: float = 1.0, octaves: int = 1):
    """Classic gradient-lattice noise in [-1, 1], zero at base lattice nodes.

    Quintic fade, persistence 0.5, lacunarity 2.  Gradients come from a
    seeded integer hash of the lattice coordinates, so values are a pure
    function of (x, y, seed).
    """
    if cell_size <= 0:
        raise ValidationError("cell_size must be positive")
    if octaves < 1:
        raise ValidationError("octaves must be >= 1")
    x = np.asarray(x, dtype=np.float64) / cell_size
    y = np.asarray(y, dtype=np.float64) / cell_size
    total = np.zeros(np.broadcast(x, y).shape)
    amp = 1.0
    norm = 0.0
    for octave in range(octaves):
        freq = float(1 << octave)
        total += amp * _perlin2_base(x * freq, y * freq, _mix(seed, octave))
        norm += amp
        amp *= 0.5
    out = total / norm
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Box synthesis
# ---------------------------------------------------------------------------


def _stream(seed: int, stream: int, attempt: int = 0) -> np.random.Generator:
    key = np.array([int(seed) & _MASK64, _mix(stream, attempt)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _lerp(a: float, b: float, t: float) -> float:
    return a + (b - a) * t


def _sched(sched, difficulty: float, r: float) -> float:
    lo = _lerp(sched[0], sched[2], difficulty)
    hi = _lerp(sched[1], sched[3], difficulty)
    return _lerp(lo, hi, r)


def _rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    x, y, z = axis
    c, s = np.cos(angle), np.sin(angle)
    C = 1.0 - c
    return np.array(
        [
            [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
            [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
            [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
        ]
    )


def random_rotation(r1: float, r2: float, r3: float) -> np.ndarray:
    """Uniform SO(3) rotation from three uniform scalars (subgroup algorithm)."""
    theta = 2.0 * np.pi * r1
    phi = 2.0 * np.pi * r2
    z = r3
    v = np.array(
        [np.cos(phi) * np.sqrt(z), np.sin(phi) * np.sqrt(z), np.sqrt(1.0 - z)]
    )
    return (2.0 * np.outer(v, v) - np.eye(3)) @ _rot_z(theta)


def _tilted_yaw(yaw: float, tilt_axis_angle: float, tilt: float) -> np.ndarray:
    axis = np.array([np.cos(tilt_axis_angle), np.sin(tilt_axis_angle), 0.0])
    return _axis_angle(axis, tilt) @ _rot_z(yaw)


def _support_z(rotation: np.ndarray, half: np.ndarray) -> float:
    return float(np.abs(rotation.T @ np.array([0.0, 0.0, 1.0])) @ half)


def _floor_box(r, difficulty, cfg) -> OrientedBox:
    height = _sched(cfg.hurdle_sched, difficulty, r[0])
    half = np.array(
        [
            _lerp(0.25, 0.7, r[1]) + 0.15 * difficulty,
            _lerp(0.25, 0.7, r[2]) + 0.15 * difficulty,
            height / 2.0,
        ]
    )
    rot = _tilted_yaw(2.0 * np.pi * r[3], 2.0 * np.pi * r[4], np.radians(12.0) * r[5])
    cx = _lerp(0.8, cfg.room[0] - 0.8, r[6])
    cy = _lerp(0.8, cfg.room[1] - 0.8, r[7])
    cz = _support_z(rot, half)
    return OrientedBox(np.array([cx, cy, cz]), half, rot, anchor="floor")


def _ceiling_box(r, difficulty, cfg) -> OrientedBox:
    clearance = _sched(cfg.overhead_sched, difficulty, r[0])
    depth = max(0.12, (cfg.room[2] - clearance) / 2.0 + 0.05)
    half = np.array(
        [
            _lerp(0.3, 0.8, r[1]) + 0.2 * difficulty,
            _lerp(0.3, 0.8, r[2]) + 0.2 * difficulty,
            depth,
        ]
    )
    rot = _tilted_yaw(2.0 * np.pi * r[3], 2.0 * np.pi * r[4], np.radians(8.0) * r[5])
    cx = _lerp(0.8, cfg.room[0] - 0.8, r[6])
    cy = _lerp(0.8, cfg.room[1] - 0.8, r[7])
    cz = clearance + _support_z(rot, half)
    return OrientedBox(np.array([cx, cy, cz]), half, rot, anchor="ceiling")


def _pair_boxes(ra, rb, difficulty, cfg) -> list[OrientedBox]:
    gap = _sched(cfg.passage_sched, difficulty, ra[0])
    yaw = 2.0 * np.pi * ra[1]
    across = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    cx = cfg.room[0] / 2.0 + (ra[2] - 0.5) * 1.6
    cy = cfg.room[1] / 2.0 + (ra[3] - 0.5) * 1.6
    boxes = []
    for side, r in ((1.0, ra), (-1.0, rb)):
        h_across = _lerp(0.15, 0.35, r[4])
        h_along = _lerp(0.5, 1.0, r[5])
        h_up = _lerp(1.3, 2.0, r[6]) / 2.0
        half = np.array([h_across, h_along, h_up])
        rot = _rot_z(yaw)
        center = (
            np.array([cx, cy, 0.0])
            + side * (gap / 2.0 + h_across) * across
            + np.array([0.0, 0.0, h_up])
        )
        boxes.append(OrientedBox(center, half, rot, anchor="floor"))
    return boxes


def _mid_box(r, difficulty, cfg) -> OrientedBox:
    hi = _lerp(0.35, 0.55, difficulty)
    half = np.array(
        [
            _lerp(0.15, hi, r[0]),
            _lerp(0.15, hi, r[1]),
            _lerp(0.15, hi, r[2]),
        ]
    )
    rot = random_rotation(r[3], r[4], r[5])
    cx = _lerp(0.8, cfg.room[0] - 0.8, r[6])
    cy = _lerp(0.8, cfg.room[1] - 0.8, r[7])
    cz = _lerp(0.6, 1.6, r[8])
    return OrientedBox(np.array([cx, cy, cz]), half, rot, anchor="mid")


def box_count(difficulty: float, cfg: SceneGenConfig) -> int:
    return int(round(cfg.n_min + difficulty * (cfg.n_max - cfg.n_min)))


def generate_boxes(
    seed: int,
    difficulty: float,
    cfg: SceneGenConfig | None = None,
    attempt: int = 0,
) -> list[OrientedBox]:
    """Deterministic obstacle set for one scene.

    The first four slots are structured features (floor hurdle, ceiling
    obstacle, lateral passage pair) so that ground, overhead, and lateral
    constraints all appear once enough boxes are drawn (difficulty >= 0.5
    guarantees the full set); remaining slots are fillers with random
    anchors and uniform SO(3) rotations.  All random draws are independent
    of difficulty, which only reshapes them, so scenes vary smoothly along
    the curriculum for a fixed seed.
    """
    cfg = cfg or SceneGenConfig()
    if not 0.0 <= difficulty <= 1.0:
        raise ValidationError("difficulty must lie in [0, 1]")
    rng = _stream(seed, STREAM_BOXES, attempt)
    raws = rng.random((cfg.n_max, _DRAWS_PER_BOX))
    n = box_count(difficulty, cfg)
    boxes: list[OrientedBox] = []
    i = 0
    while len(boxes) < n:
        r = raws[i]
        if i == 0:
            boxes.append(_floor_box(r, difficulty, cfg))
        elif i == 1:
            boxes.append(_ceiling_box(r, difficulty, cfg))
        elif i == 2 and n >= 4:
            boxes.extend(_pair_boxes(raws[2], raws[3], difficulty, cfg))
            i += 1
        else:
            pick = r[9]
            if pick < 0.35:
                boxes.append(_floor_box(r, difficulty, cfg))
            elif pick < 0.6:
                boxes.append(_ceiling_box(r, difficulty, cfg))
            else:
                boxes.append(_mid_box(r, difficulty, cfg))
        i += 1
    return boxes[:n]


# ---------------------------------------------------------------------------
# Rasterization with surface deformation
# ---------------------------------------------------------------------------


def deform_and_rasterize(
    spec: GridSpec,
    boxes,
    perlin: PerlinConfig,
    seed: int,
) -> OccupancyGrid:
    """Union of boxes whose faces are displaced along their normals by noise.

    Each of the six faces of each box carries its own noise stream over the
    face's 2D parameterization (the other two box-frame coordinates).  A voxel
    centre is occupied when it passes every displaced-face test and lies
    within ``amplitude`` of the exact box surface, so the deformation never
    reaches farther than the noise amplitude.
    """
    amp = perlin.amplitude
    occ = np.zeros(spec.shape, dtype=bool)
    for bi, box in enumerate(boxes):
        lo_w, hi_w = box.aabb()
        lo = np.maximum(spec.world_to_index(lo_w - amp), 0)
        hi = np.minimum(spec.world_to_index(hi_w + amp) + 1, np.asarray(spec.dims))
        if np.any(lo >= hi):
            continue
        axes = [
            spec.origin[a] + (np.arange(lo[a], hi[a]) + 0.5) * spec.resolution
            for a in range(3)
        ]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([gx, gy, gz], axis=-1)
        local = box.to_local(pts)
        if amp == 0.0:
            inside = np.all(np.abs(local) <= box.half_extents, axis=-1)
        else:
            # Noise can only flip voxels within one amplitude of the exact
            # surface; the deep core and far exterior are decided outright.
            excess = np.abs(local) - box.half_extents
            core = np.all(excess <= -amp, axis=-1)
            outside = np.clip(excess, 0.0, None)
            near = (
                np.einsum("...i,...i->...", outside, outside) <= amp * amp
            ) & ~core
            shell = local[near]
            keep = np.ones(shell.shape[0], dtype=bool)
            for axis in range(3):
                u = shell[:, (axis + 1) % 3]
                v = shell[:, (axis + 2) % 3]
                face_hi = perlin2(
                    u, v, _mix(seed, bi, 2 * axis), perlin.cell_size, perlin.octaves
                )
                face_lo = perlin2(
                    u, v, _mix(seed, bi, 2 * axis + 1), perlin.cell_size, perlin.octaves
                )
                h = box.half_extents[axis]
                keep &= shell[:, axis] <= h + amp * face_hi
                keep &= shell[:, axis] >= -h - amp * face_lo
            inside = core.copy()
            inside[near] = keep
        occ[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]] |= inside
    return OccupancyGrid(spec, occ)


def cleanup(grid: OccupancyGrid, radius_vox: int) -> OccupancyGrid:
    """Morphological close-then-open: seal cracks first, then shave spikes."""
    if radius_vox < 1:
        raise ValidationError("cleanup radius must be >= 1")
    return morph_open(morph_close(grid, radius_vox), radius_vox)


def add_room_walls(grid: OccupancyGrid) -> OccupancyGrid:
    """One-voxel walls on the four lateral faces (floor and ceiling stay open)."""
    occ = grid.occupied.copy()
    occ[0, :, :] = True
    occ[-1, :, :] = True
    occ[:, 0, :] = True
    occ[:, -1, :] = True
    return OccupancyGrid(grid.spec, occ)


def manifest_to_grid(manifest: SceneManifest) -> OccupancyGrid:
    """Re-rasterize a manifest; byte-identical for identical manifests."""
    spec = manifest.grid_spec()
    grid = deform_and_rasterize(spec, manifest.boxes, manifest.perlin, manifest.seed)
    if manifest.morph_radius_vox >= 1:
        grid = cleanup(grid, manifest.morph_radius_vox)
    return add_room_walls(grid)


# ---------------------------------------------------------------------------
# Walkable analysis, start/goal sampling, certification
# ---------------------------------------------------------------------------


def erode_walkable(
    grid: OccupancyGrid, radius: float, height_band: float = 1.9
) -> np.ndarray:
    """2D walkable mask: project the height band down, erode free cells by a disc.

    A ground cell is blocked when any voxel whose centre lies below
    ``height_band`` above it is occupied; the surviving free mask is then
    eroded by a Euclidean disc of the given metric radius (cells beyond the
    grid border count as blocked).
    """
    if radius < 0:
        raise ValidationError("radius must be >= 0")
    res = grid.spec.resolution
    centers_z = grid.spec.origin[2] + (np.arange(grid.spec.dims[2]) + 0.5) * res
    band = centers_z < height_band
    blocked = grid.occupied[:, :, band].any(axis=2)
    free = ~blocked
    if radius == 0:
        return free
    padded = np.pad(blocked, 1, constant_values=True)
    d2 = squared_edt(padded)[1:-1, 1:-1]
    r_cells = radius / res
    return free & (d2 > r_cells * r_cells)


def mask_cell_centers(mask: np.ndarray, spec: GridSpec) -> np.ndarray:
    cells = np.argwhere(mask)
    return spec.origin[:2] + (cells + 0.5) * spec.resolution


def sample_start_goal(
    mask: np.ndarray,
    spec: GridSpec,
    seed: int,
    circle_radius: float = 2.0,
    height: float = 0.7,
    stream: int = STREAM_START_GOAL,
    attempt: int = 0,
    max_retries: int = 1024,
):
    """Uniform start on the free mask, goal on the circle around it.

    The goal is drawn uniformly from free cells whose centre lies within half
    a cell of the circle; when a start has no such cell, a fresh start is
    drawn, up to the retry budget.
    """
    cells = np.argwhere(mask)
    if cells.shape[0] == 0:
        raise SceneRejectedError("walkable mask has no free cell")
    rng = _stream(seed, stream, attempt)
    res = spec.resolution
    centers = spec.origin[:2] + (cells + 0.5) * res
    for _ in range(max_retries):
        start_xy = centers[rng.integers(cells.shape[0])]
        dist = np.linalg.norm(centers - start_xy, axis=1)
        candidates = np.flatnonzero(np.abs(dist - circle_radius) <= res / 2.0)
        if candidates.size == 0:
            continue
        goal_xy = centers[candidates[rng.integers(candidates.size)]]
        start = np.array([start_xy[0], start_xy[1], height])
        goal = np.array([goal_xy[0], goal_xy[1], height])
        return start, goal
    raise SceneRejectedError(
        f"no start/goal pair on the {circle_radius} m circle after {max_retries} draws"
    )


def mask_connected(mask: np.ndarray, spec: GridSpec, a, b) -> bool:
    """8-connected reachability between the cells containing two world points."""
    ia = tuple(spec.world_to_index(np.array([a[0], a[1], 0.0]))[:2])
    ib = tuple(spec.world_to_index(np.array([b[0], b[1], 0.0]))[:2])
    nx, ny = mask.shape
    if not (0 <= ia[0] < nx and 0 <= ia[1] < ny):
        return False
    if not (0 <= ib[0] < nx and 0 <= ib[1] < ny):
        return False
    if not (mask[ia] and mask[ib]):
        return False
    seen = np.zeros_like(mask)
    seen[ia] = True
    queue = deque([ia])
    while queue:
        x, y = queue.popleft()
        if (x, y) == ib:
            return True
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                px, py = x + dx, y + dy
                if 0 <= px < nx and 0 <= py < ny and mask[px, py] and not seen[px, py]:
                    seen[px, py] = True
                    queue.append((px, py))
    return False


def certify_traversable(
    grid: OccupancyGrid, start, goal, clearance_radius: float
) -> bool:
    """True when the clearance-eroded free space connects start to goal.

    Free space is eroded by dilating obstacles with a ball of the agent
    clearance radius; traversability then means the geodesic distance from
    the goal is finite at the start voxel.
    """
    r_vox = int(round(clearance_radius / grid.spec.resolution))
    eroded = morph_dilate(grid, r_vox)
    start_idx = grid.spec.world_to_index(start)
    goal_idx = grid.spec.world_to_index(goal)
    if not (grid.spec.contains_index(start_idx) and grid.spec.contains_index(goal_idx)):
        return False
    if eroded.occupied[tuple(start_idx)] or eroded.occupied[tuple(goal_idx)]:
        return False
    dist = geodesic_field(eroded, goal)
    return bool(np.isfinite(dist.values[tuple(start_idx)]))


def generate_scene(
    seed: int,
    difficulty: float,
    cfg: SceneGenConfig | None = None,
) -> tuple[SceneManifest, OccupancyGrid]:
    """Generate one certified scene: boxes, grid, and a traversable start/goal.

    Rejected attempts (blocked masks, unreachable pairs) re-draw boxes and
    start/goal deterministically, so the output is still a pure function of
    (seed, difficulty, config).
    """
    cfg = cfg or SceneGenConfig()
    if not 0.0 <= difficulty <= 1.0:
        raise ValidationError("difficulty must lie in [0, 1]")
    spec = cfg.grid_spec()
    sample_radius = cfg.agent_clearance + cfg.resolution
    for attempt in range(cfg.max_attempts):
        boxes = generate_boxes(seed, difficulty, cfg, attempt=attempt)
        raw = deform_and_rasterize(spec, boxes, cfg.perlin, seed)
        grid = add_room_walls(cleanup(raw, cfg.morph_radius_vox))
        stand_mask = erode_walkable(grid, sample_radius, cfg.stand_band)
        crouch_mask = erode_walkable(grid, cfg.agent_clearance, cfg.crouch_band)
        if not stand_mask.any():
            continue
        for pair_try in range(8):
            try:
                start, goal = sample_start_goal(
                    mask=stand_mask,
                    spec=spec,
                    seed=seed,
                    circle_radius=cfg.goal_circle,
                    height=cfg.start_height,
                    attempt=attempt * 8 + pair_try,
                )
            except SceneRejectedError:
                break
            if not mask_connected(crouch_mask, spec, start, goal):
                continue
            if not certify_traversable(grid, start, goal, cfg.agent_clearance):
                continue
            manifest = SceneManifest(
                seed=seed,
                difficulty=difficulty,
                room=cfg.room,
                resolution=cfg.resolution,
                boxes=boxes,
                perlin=cfg.perlin,
                morph_radius_vox=cfg.morph_radius_vox,
                start=start,
                goal=goal,
            )
            return manifest, grid
    raise SceneRejectedError(
        f"no certified scene for seed={seed} difficulty={difficulty} "
        f"after {cfg.max_attempts} attempts"
    )
