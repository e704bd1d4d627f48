"""Guidance-field construction and priority-weighted body-part queries.

The field combines a geodesic attractive potential (shortest obstacle-free
path to the goal over the 26-connected free-voxel graph) with an inverse
signed-distance repulsive potential, and guides motion along the negative
gradient of their sum.  Queries at body-part positions return direction
vectors attenuated by a root-priority weight and a dynamic collision-urgency
weight; the weighted magnitude doubles as a concentration input for the
directional motion prior (see :mod:`fieldnav.vmf`).

``build_field`` is a pure construction; the returned bundle is immutable and
safe for unbounded concurrent queries.  Goal changes build a fresh bundle
that owners swap in atomically (see :mod:`fieldnav.server`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ArityError, InvalidGoalError, ValidationError
from .grid import (
    GridSpec,
    OccupancyGrid,
    ScalarField,
    VectorField,
    gradient_central,
    signed_distance,
)


@dataclass(frozen=True)
class FieldParams:
    """All scalar knobs of the guidance field.

    attract_gain scales the geodesic potential; repulse_gain and
    influence_dist shape the obstacle term (zero beyond influence_dist);
    urgency_gain scales the collision-urgency weight; kappa_max converts
    weighted field magnitude into prior concentration; min_clamp_dist floors
    the repulsion singularity; zero_field_tol decides when a sampled field
    counts as degenerate.
    """

    attract_gain: float = 1.0
    repulse_gain: float = 0.05
    influence_dist: float = 0.5
    urgency_gain: float = 1.0
    kappa_max: float = 10.0
    min_clamp_dist: float = 0.05
    zero_field_tol: float = 1e-8

    def __post_init__(self):
        if self.attract_gain < 0 or self.repulse_gain < 0:
            raise ValidationError("gains must be non-negative")
        if self.influence_dist <= 0:
            raise ValidationError("influence_dist must be positive")
        if self.urgency_gain <= 0 or self.kappa_max <= 0:
            raise ValidationError("urgency_gain and kappa_max must be positive")
        if not 0 < self.min_clamp_dist < self.influence_dist:
            raise ValidationError("need 0 < min_clamp_dist < influence_dist")
        if self.zero_field_tol <= 0:
            raise ValidationError("zero_field_tol must be positive")


@dataclass
class BodyPartState:
    """Position, velocity, and role of one queried body part."""

    part_id: int
    position: np.ndarray
    velocity: np.ndarray
    is_root: bool = False
    radius: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.velocity = np.asarray(self.velocity, dtype=np.float64)
        if self.position.shape != (3,) or self.velocity.shape != (3,):
            raise ValidationError("part position/velocity must be 3-vectors")
        if self.radius < 0:
            raise ValidationError("part radius must be >= 0")


@dataclass
class GuidanceField:
    """Immutable bundle of everything needed to answer part queries.

    ``geodesic`` and ``potential`` keep their sentinels (occupied or
    unreachable voxels); ``sdf`` is stored sentinel-free so it can be sampled
    directly, and ``guidance``/``sdf_grad`` are derived from filled fields.
    """

    spec: GridSpec
    goal: np.ndarray
    params: FieldParams
    geodesic: ScalarField
    sdf: ScalarField
    potential: ScalarField
    guidance: VectorField
    sdf_grad: VectorField


@dataclass
class FieldQuery:
    """A priority-weighted field sample at one body part."""

    part: BodyPartState
    vector: np.ndarray
    root_weight: float
    urgency: float
    mean_dir: np.ndarray
    kappa: float

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.vector))


# ---------------------------------------------------------------------------
# Geodesic distance (single-source shortest paths on the free-voxel graph)
# ---------------------------------------------------------------------------

_X_AXIS = np.array([1.0, 0.0, 0.0])


def _neighbor_table(resolution: float):
    offsets = []
    weights = []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                if dx == dy == dz == 0:
                    continue
                offsets.append((dx, dy, dz))
                weights.append(resolution * math.sqrt(dx * dx + dy * dy + dz * dz))
    return np.array(offsets, dtype=np.int64), np.array(weights, dtype=np.float64)


@njit(cache=True)
def _dijkstra_grid(free, src, offsets, weights):
    nx, ny, nz = free.shape
    n = nx * ny * nz
    dist = np.full(n, np.inf)
    heap = np.empty(n, np.int64)
    pos = np.full(n, -1, np.int64)  # -1 unseen, -2 finalized, else heap slot
    dist[src] = 0.0
    heap[0] = src
    pos[src] = 0
    size = 1
    while size > 0:
        u = heap[0]
        size -= 1
        last = heap[size]
        heap[0] = last
        pos[last] = 0
        pos[u] = -2
        i = 0
        while True:  # sift down
            left = 2 * i + 1
            right = left + 1
            smallest = i
            if left < size and dist[heap[left]] < dist[heap[smallest]]:
                smallest = left
            if right < size and dist[heap[right]] < dist[heap[smallest]]:
                smallest = right
            if smallest == i:
                break
            tmp = heap[i]
            heap[i] = heap[smallest]
            heap[smallest] = tmp
            pos[heap[i]] = i
            pos[heap[smallest]] = smallest
            i = smallest
        du = dist[u]
        ux = u // (ny * nz)
        uy = (u // nz) % ny
        uz = u % nz
        for k in range(offsets.shape[0]):
            vx = ux + offsets[k, 0]
            vy = uy + offsets[k, 1]
            vz = uz + offsets[k, 2]
            if vx < 0 or vx >= nx or vy < 0 or vy >= ny or vz < 0 or vz >= nz:
                continue
            if not free[vx, vy, vz]:
                continue
            v = vx * ny * nz + vy * nz + vz
            if pos[v] == -2:
                continue
            nd = du + weights[k]
            if nd < dist[v]:
                dist[v] = nd
                if pos[v] == -1:
                    heap[size] = v
                    pos[v] = size
                    size += 1
                    i = size - 1
                else:
                    i = pos[v]
                while i > 0:  # sift up
                    parent = (i - 1) // 2
                    if dist[heap[parent]] <= dist[heap[i]]:
                        break
                    tmp = heap[i]
                    heap[i] = heap[parent]
                    heap[parent] = tmp
                    pos[heap[i]] = i
                    pos[heap[parent]] = parent
                    i = parent
    return dist


def geodesic_field(grid: OccupancyGrid, goal) -> ScalarField:
    """Shortest-path distance from every free voxel to the goal voxel.

    Edges connect 26-neighboring free voxels with Euclidean step weights
    (resolution times 1, sqrt(2), or sqrt(3)).  Occupied and unreachable
    voxels carry the +inf sentinel.
    """
    goal = np.asarray(goal, dtype=np.float64)
    spec = grid.spec
    idx = spec.world_to_index(goal)
    if not spec.contains_index(idx):
        raise InvalidGoalError(f"goal {goal.tolist()} outside the grid")
    if grid.occupied[tuple(idx)]:
        raise InvalidGoalError(f"goal {goal.tolist()} is inside an obstacle")
    offsets, weights = _neighbor_table(spec.resolution)
    nx, ny, nz = spec.dims
    src = int(idx[0] * ny * nz + idx[1] * nz + idx[2])
    dist = _dijkstra_grid(~grid.occupied, src, offsets, weights)
    values = dist.reshape(spec.dims)
    values = np.where(grid.occupied, np.inf, values)
    return ScalarField(spec, values)


# ---------------------------------------------------------------------------
# Potentials and assembly
# ---------------------------------------------------------------------------


def attractive_potential(geodesic: ScalarField, gain: float) -> ScalarField:
    """Scale the geodesic distance; sentinels pass through untouched."""
    finite = np.isfinite(geodesic.values)
    values = np.full(geodesic.spec.shape, np.inf)
    values[finite] = gain * geodesic.values[finite]
    return ScalarField(geodesic.spec, values)


def repulsive_values(d, gain: float, influence: float, clamp: float):
    """Obstacle potential as a function of signed distance.

    Zero at and beyond the influence range, half * gain * (1/d - 1/influence)^2
    inside it, and constant (the clamp value) below the clamp distance so the
    potential stays finite inside obstacles.
    """
    d = np.asarray(d, dtype=np.float64)
    dc = np.clip(d, clamp, None)
    vals = np.where(
        dc >= influence, 0.0, 0.5 * gain * (1.0 / dc - 1.0 / influence) ** 2
    )
    return vals


def repulsive_potential(
    sdf: ScalarField, gain: float, influence: float, clamp: float
) -> ScalarField:
    if not 0 < clamp < influence:
        raise ValidationError("need 0 < clamp < influence")
    d = np.where(np.isfinite(sdf.values), sdf.values, np.sign(sdf.values) * 1e30)
    return ScalarField(sdf.spec, repulsive_values(d, gain, influence, clamp))


def _filled_sdf(raw: ScalarField) -> ScalarField:
    if not raw.sentinel_mask.any():
        return raw
    diag = float(np.linalg.norm(raw.spec.extent))
    values = np.clip(raw.values, -diag, diag)
    return ScalarField(raw.spec, values)


def build_field(grid: OccupancyGrid, goal, params: FieldParams) -> GuidanceField:
    """Assemble the full guidance bundle for a static scene and goal."""
    goal = np.asarray(goal, dtype=np.float64)
    geodesic = geodesic_field(grid, goal)
    sdf = _filled_sdf(signed_distance(grid))
    u_att = attractive_potential(geodesic, params.attract_gain)
    u_rep = repulsive_potential(
        sdf, params.repulse_gain, params.influence_dist, params.min_clamp_dist
    )
    potential = ScalarField(grid.spec, u_att.values + u_rep.values)
    slope = params.attract_gain if params.attract_gain > 0 else 1.0
    bump = 10.0 * grid.spec.resolution * slope
    u_filled = potential.filled(bump)
    guidance = VectorField(grid.spec, -gradient_central(u_filled).vectors)
    sdf_grad = gradient_central(sdf)
    return GuidanceField(
        spec=grid.spec,
        goal=goal,
        params=params,
        geodesic=geodesic,
        sdf=sdf,
        potential=potential,
        guidance=guidance,
        sdf_grad=sdf_grad,
    )


# ---------------------------------------------------------------------------
# Priority weights and queries
# ---------------------------------------------------------------------------


def root_weight(part: BodyPartState) -> float:
    """Static priority: 1.0 for the root part, 0.5 for everything else."""
    return 1.0 if part.is_root else 0.5


def collision_urgency(
    part: BodyPartState,
    sdf: ScalarField,
    sdf_grad: VectorField,
    gain: float,
) -> float:
    """Dynamic weight: gain * max(-grad_d . v, 0.5) * exp(-d) at the part.

    Both d and its gradient are sampled trilinearly at the part position; the
    gradient is used as sampled so the dot product keeps approach-speed units.
    """
    d = float(sdf.sample(part.position))
    grad = sdf_grad.sample(part.position)
    approach = float(-(grad @ part.velocity))
    return gain * max(approach, 0.5) * math.exp(-d)


def query_guidance(field: GuidanceField, part: BodyPartState) -> FieldQuery:
    """Sample the guidance field at a part and apply the priority weights.

    Returns the weighted vector w0 * w1 * F/|F| plus the derived direction and
    concentration; a degenerate field (|F| below tolerance) yields a zero
    query with kappa 0 and a placeholder direction.
    """
    params = field.params
    raw = field.guidance.sample(part.position)
    norm = float(np.linalg.norm(raw))
    w0 = root_weight(part)
    w1 = collision_urgency(part, field.sdf, field.sdf_grad, params.urgency_gain)
    if norm <= params.zero_field_tol:
        return FieldQuery(
            part=part,
            vector=np.zeros(3),
            root_weight=w0,
            urgency=w1,
            mean_dir=_X_AXIS.copy(),
            kappa=0.0,
        )
    direction = raw / norm
    return FieldQuery(
        part=part,
        vector=(w0 * w1) * direction,
        root_weight=w0,
        urgency=w1,
        mean_dir=direction,
        kappa=params.kappa_max * w0 * w1,
    )


def field_observation(field: GuidanceField, parts, expected_count: int = 13) -> np.ndarray:
    """Concatenated weighted field vectors in part-id order, shape (3K,)."""
    parts = list(parts)
    if len(parts) != expected_count:
        raise ArityError(f"expected {expected_count} parts, got {len(parts)}")
    ids = sorted(p.part_id for p in parts)
    if ids != list(range(expected_count)):
        raise ArityError(f"part ids must be 0..{expected_count - 1}, got {ids}")
    ordered = sorted(parts, key=lambda p: p.part_id)
    return np.concatenate([query_guidance(field, p).vector for p in ordered])
