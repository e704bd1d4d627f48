"""Metric voxel lattices and the numeric substrate built on them.

Provides axis-aligned boolean occupancy grids plus scalar/vector fields with
trilinear sampling, an exact Euclidean distance transform (per-axis squared
distance decomposition), central-difference gradients, 3D morphology with a
Euclidean-ball structuring element, and a small binary dump format.

Conventions
-----------
Arrays are indexed ``[ix, iy, iz]`` with shape ``(nx, ny, nz)``.  Voxel ``i``
is centred at ``origin + (i + 0.5) * resolution``.  Scalar fields may contain
non-finite sentinels meaning "unreachable / undefined"; they must be filled
(:meth:`ScalarField.filled`) before interpolation or differentiation.

Binary dump format (``.vxf``): header ``magic "VXF1" | u32 nx, ny, nz |
f32 resolution | f32 origin x, y, z`` (little-endian, 32 bytes), then a
row-major payload with x varying fastest — ``u8`` for occupancy, ``f32`` for
scalar fields, ``3 x f32`` per voxel for vector fields.

Every construction op here is a pure function of its inputs; produced
lattices are treated as immutable afterwards and are safe for concurrent
read-only sampling.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import CapacityError, DomainError, ValidationError

DEFAULT_VOXEL_BUDGET = 64_000_000

_MAGIC = b"VXF1"
_HEADER = struct.Struct("<4sIIIffff")


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a uniform cubic voxel lattice."""

    origin: np.ndarray
    resolution: float
    dims: tuple[int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.origin.shape != (3,):
            raise ValidationError("origin must be a 3-vector")
        if not self.resolution > 0:
            raise ValidationError("resolution must be positive")
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise ValidationError("dims must be three positive integers")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.dims

    @property
    def num_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def extent(self) -> np.ndarray:
        """Metric size of the lattice per axis."""
        return np.asarray(self.dims, dtype=np.float64) * self.resolution

    def cell_centers(self) -> np.ndarray:
        """World coordinates of every cell centre, shape (nx, ny, nz, 3)."""
        axes = [
            self.origin[a] + (np.arange(self.dims[a]) + 0.5) * self.resolution
            for a in range(3)
        ]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        return np.stack([gx, gy, gz], axis=-1)

    def index_to_world(self, index) -> np.ndarray:
        """Centre of the given voxel index (broadcasts over leading dims)."""
        idx = np.asarray(index, dtype=np.float64)
        return self.origin + (idx + 0.5) * self.resolution

    def world_to_index(self, point) -> np.ndarray:
        """Voxel index containing the given world point."""
        p = np.asarray(point, dtype=np.float64)
        return np.floor((p - self.origin) / self.resolution).astype(np.int64)

    def contains_index(self, index) -> bool:
        idx = np.asarray(index)
        return bool(np.all(idx >= 0) and np.all(idx < np.asarray(self.dims)))

    def sample_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Interior sampling box: the convex hull of cell centres."""
        lo = self.origin + 0.5 * self.resolution
        hi = self.origin + (np.asarray(self.dims) - 0.5) * self.resolution
        return lo, hi


@dataclass(frozen=True)
class OrientedBox:
    """A rotated box; ``anchor`` records how the generator placed it."""

    center: np.ndarray
    half_extents: np.ndarray
    rotation: np.ndarray
    anchor: str = "mid"

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        object.__setattr__(
            self, "half_extents", np.asarray(self.half_extents, dtype=np.float64)
        )
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))
        if self.center.shape != (3,) or self.half_extents.shape != (3,):
            raise ValidationError("box center/half_extents must be 3-vectors")
        if np.any(self.half_extents <= 0):
            raise ValidationError("box half_extents must be positive")
        R = self.rotation
        if R.shape != (3, 3):
            raise ValidationError("rotation must be 3x3")
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-9):
            raise ValidationError("rotation must be orthonormal")
        if not np.isclose(np.linalg.det(R), 1.0, atol=1e-9):
            raise ValidationError("rotation must have determinant +1")
        if self.anchor not in ("floor", "ceiling", "mid"):
            raise ValidationError(f"unknown anchor {self.anchor!r}")

    def to_local(self, points: np.ndarray) -> np.ndarray:
        """Map world points (..., 3) into the box frame."""
        return (np.asarray(points, dtype=np.float64) - self.center) @ self.rotation

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Inclusive point-in-box test in the box frame."""
        local = self.to_local(points)
        return np.all(np.abs(local) <= self.half_extents, axis=-1)

    def support(self, axis: np.ndarray) -> float:
        """Half-width of the box along a world axis (support function)."""
        a = np.asarray(axis, dtype=np.float64)
        return float(np.abs(self.rotation.T @ a) @ self.half_extents)

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        half = np.abs(self.rotation) @ self.half_extents
        return self.center - half, self.center + half


@dataclass
class OccupancyGrid:
    spec: GridSpec
    occupied: np.ndarray

    def __post_init__(self):
        self.occupied = np.ascontiguousarray(self.occupied, dtype=bool)
        if self.occupied.shape != self.spec.shape:
            raise ValidationError("occupancy shape does not match grid dims")

    @classmethod
    def empty(cls, spec: GridSpec) -> "OccupancyGrid":
        return cls(spec, np.zeros(spec.shape, dtype=bool))

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.spec, self.occupied.copy())


@dataclass
class ScalarField:
    """Per-voxel scalar lattice; non-finite entries are sentinels."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != self.spec.shape:
            raise ValidationError("value shape does not match grid dims")
        if np.isnan(self.values).any():
            raise ValidationError("NaN is not a permitted sentinel")

    @property
    def sentinel_mask(self) -> np.ndarray:
        return ~np.isfinite(self.values)

    def filled(self, bump: float) -> "ScalarField":
        """Replace sentinels with ``max finite + bump`` (just ``bump`` if none)."""
        mask = self.sentinel_mask
        if not mask.any():
            return self
        finite = self.values[~mask]
        top = float(finite.max()) if finite.size else 0.0
        out = self.values.copy()
        out[mask] = top + bump
        return ScalarField(self.spec, out)

    def sample(self, points) -> np.ndarray:
        return sample_trilinear(self, points)


@dataclass
class VectorField:
    """Per-voxel 3-vector lattice, shape (nx, ny, nz, 3)."""

    spec: GridSpec
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if self.vectors.shape != self.spec.shape + (3,):
            raise ValidationError("vector shape does not match grid dims")
        if np.isnan(self.vectors).any():
            raise ValidationError("vector fields must not contain NaN")

    def sample(self, points) -> np.ndarray:
        return sample_trilinear(self, points)


# ---------------------------------------------------------------------------
# Rasterization
# ---------------------------------------------------------------------------


def rasterize_boxes(
    spec: GridSpec,
    boxes,
    max_voxels: int = DEFAULT_VOXEL_BUDGET,
) -> OccupancyGrid:
    """Mark every voxel whose centre lies inside at least one oriented box."""
    if spec.num_voxels > max_voxels:
        raise CapacityError(
            f"grid has {spec.num_voxels} voxels, budget is {max_voxels}"
        )
    occ = np.zeros(spec.shape, dtype=bool)
    for box in boxes:
        lo_w, hi_w = box.aabb()
        lo = np.maximum(spec.world_to_index(lo_w), 0)
        hi = np.minimum(spec.world_to_index(hi_w) + 1, np.asarray(spec.dims))
        if np.any(lo >= hi):
            continue
        axes = [
            spec.origin[a] + (np.arange(lo[a], hi[a]) + 0.5) * spec.resolution
            for a in range(3)
        ]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([gx, gy, gz], axis=-1)
        inside = box.contains(pts)
        occ[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]] |= inside
    return OccupancyGrid(spec, occ)


# ---------------------------------------------------------------------------
# Exact Euclidean distance transform
# ---------------------------------------------------------------------------


@njit(cache=True)
def _dt_lines(flat, axis_len, stride, line_starts):
    # Lower-envelope-of-parabolas pass along one axis, in place.  Input holds
    # squared distances (or 0 / inf seeds); infinite parabolas are skipped.
    f = np.empty(axis_len, np.float64)
    d = np.empty(axis_len, np.float64)
    v = np.empty(axis_len, np.int64)
    z = np.empty(axis_len + 1, np.float64)
    for li in range(line_starts.shape[0]):
        base = line_starts[li]
        for i in range(axis_len):
            f[i] = flat[base + i * stride]
        k = -1
        for q in range(axis_len):
            if f[q] == np.inf:
                continue
            if k >= 0:
                s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
                while s <= z[k]:
                    k -= 1
                    s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (
                        2.0 * q - 2.0 * v[k]
                    )
                k += 1
                v[k] = q
                z[k] = s
                z[k + 1] = np.inf
            else:
                k = 0
                v[0] = q
                z[0] = -np.inf
                z[1] = np.inf
        if k < 0:
            for i in range(axis_len):
                d[i] = np.inf
        else:
            j = 0
            for i in range(axis_len):
                while z[j + 1] < i:
                    j += 1
                d[i] = (i - v[j]) * (i - v[j]) + f[v[j]]
        for i in range(axis_len):
            flat[base + i * stride] = d[i]


def squared_edt(mask: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distance (in cell units) to the nearest True cell.

    Works for 2D and 3D boolean arrays; cells of an all-False input get inf.
    Distances between integer lattice points are computed exactly.
    """
    mask = np.ascontiguousarray(mask, dtype=bool)
    vol = np.where(mask, 0.0, np.inf)
    flat = vol.reshape(-1)
    shape = vol.shape
    strides = [int(s // vol.itemsize) for s in vol.strides]
    for axis in range(vol.ndim):
        other = [a for a in range(vol.ndim) if a != axis]
        grids = np.meshgrid(*[np.arange(shape[a]) for a in other], indexing="ij")
        starts = np.zeros_like(grids[0], dtype=np.int64).reshape(-1)
        for g, a in zip(grids, other):
            starts += g.reshape(-1) * strides[a]
        _dt_lines(flat, shape[axis], strides[axis], starts)
    return vol


def signed_distance(grid: OccupancyGrid) -> ScalarField:
    """Signed distance between cell centres: positive in free space.

    Free voxels get +distance to the nearest occupied centre, occupied voxels
    get -distance to the nearest free centre.  Degenerate grids yield +/- inf
    sentinels (all-free: +inf everywhere; all-occupied: -inf everywhere).
    """
    res = grid.spec.resolution
    occ = grid.occupied
    if not occ.any():
        return ScalarField(grid.spec, np.full(grid.spec.shape, np.inf))
    if occ.all():
        return ScalarField(grid.spec, np.full(grid.spec.shape, -np.inf))
    d_occ = np.sqrt(squared_edt(occ)) * res
    d_free = np.sqrt(squared_edt(~occ)) * res
    values = np.where(occ, -d_free, d_occ)
    return ScalarField(grid.spec, values)


# ---------------------------------------------------------------------------
# Sampling and gradients
# ---------------------------------------------------------------------------


def sample_trilinear(fld, points) -> np.ndarray:
    """Trilinear blend of the 8 cell centres around each query point.

    ``points`` has shape (..., 3) in meters and must lie inside the cell-centre
    hull; a point outside raises :class:`DomainError` carrying the coordinate.
    """
    spec = fld.spec
    if isinstance(fld, ScalarField):
        data = fld.values[..., None]
        squeeze = True
        if fld.sentinel_mask.any():
            raise ValidationError("fill sentinels before sampling a scalar field")
    elif isinstance(fld, VectorField):
        data = fld.vectors
        squeeze = False
    else:
        raise TypeError(f"cannot sample {type(fld).__name__}")

    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != 3:
        raise ValidationError("query points must be 3-vectors")

    rel = (pts - spec.origin) / spec.resolution - 0.5
    n = np.asarray(spec.dims)
    bad = np.any((rel < 0.0) | (rel > n - 1), axis=-1)
    if bad.any():
        p = pts[np.argmax(bad)]
        raise DomainError(f"sample point {p.tolist()} outside grid interior", point=p)

    i0 = np.minimum(np.floor(rel).astype(np.int64), n - 2)
    # Degenerate axes (single layer) pin the base cell and zero the fraction.
    i0 = np.maximum(i0, 0)
    t = np.where(n - 1 > 0, rel - i0, 0.0)

    out = np.zeros(pts.shape[:-1] + (data.shape[-1],))
    for dx in (0, 1):
        wx = t[..., 0] if dx else 1.0 - t[..., 0]
        for dy in (0, 1):
            wy = t[..., 1] if dy else 1.0 - t[..., 1]
            for dz in (0, 1):
                wz = t[..., 2] if dz else 1.0 - t[..., 2]
                ix = np.minimum(i0[..., 0] + dx, n[0] - 1)
                iy = np.minimum(i0[..., 1] + dy, n[1] - 1)
                iz = np.minimum(i0[..., 2] + dz, n[2] - 1)
                out += (wx * wy * wz)[..., None] * data[ix, iy, iz]
    if squeeze:
        out = out[..., 0]
    return out[0] if single else out


def gradient_central(fld: ScalarField) -> VectorField:
    """Per-voxel gradient: central differences inside, one-sided at the faces."""
    if fld.sentinel_mask.any():
        raise ValidationError("fill sentinels before differentiating")
    res = fld.spec.resolution
    comps = []
    for axis in range(3):
        if fld.spec.dims[axis] < 2:
            comps.append(np.zeros(fld.spec.shape))
        else:
            comps.append(np.gradient(fld.values, res, axis=axis, edge_order=1))
    return VectorField(fld.spec, np.stack(comps, axis=-1))


# ---------------------------------------------------------------------------
# Morphology (Euclidean-ball structuring element)
# ---------------------------------------------------------------------------


def _dilate(occ: np.ndarray, radius_vox: int) -> np.ndarray:
    if radius_vox == 0 or not occ.any():
        return occ.copy()
    return squared_edt(occ) <= radius_vox * radius_vox


def _erode(occ: np.ndarray, radius_vox: int) -> np.ndarray:
    # Adjoint of _dilate on the finite lattice: cells beyond the border count
    # as occupied, which preserves opening/closing idempotence.
    return ~_dilate(~occ, radius_vox)


def morph_dilate(grid: OccupancyGrid, radius_vox: int) -> OccupancyGrid:
    if radius_vox < 0:
        raise ValidationError("radius_vox must be >= 0")
    return OccupancyGrid(grid.spec, _dilate(grid.occupied, radius_vox))


def morph_erode(grid: OccupancyGrid, radius_vox: int) -> OccupancyGrid:
    if radius_vox < 0:
        raise ValidationError("radius_vox must be >= 0")
    return OccupancyGrid(grid.spec, _erode(grid.occupied, radius_vox))


def morph_close(grid: OccupancyGrid, radius_vox: int) -> OccupancyGrid:
    """Dilate then erode; seals cracks narrower than the ball."""
    if radius_vox < 0:
        raise ValidationError("radius_vox must be >= 0")
    return OccupancyGrid(grid.spec, _erode(_dilate(grid.occupied, radius_vox), radius_vox))


def morph_open(grid: OccupancyGrid, radius_vox: int) -> OccupancyGrid:
    """Erode then dilate; shaves protrusions thinner than the ball."""
    if radius_vox < 0:
        raise ValidationError("radius_vox must be >= 0")
    return OccupancyGrid(grid.spec, _dilate(_erode(grid.occupied, radius_vox), radius_vox))


# ---------------------------------------------------------------------------
# Binary dump format
# ---------------------------------------------------------------------------


def save_field(path, fld) -> None:
    """Write an occupancy grid or scalar/vector field as a .vxf dump."""
    spec = fld.spec
    nx, ny, nz = spec.dims
    header = _HEADER.pack(
        _MAGIC, nx, ny, nz, spec.resolution, *(float(v) for v in spec.origin)
    )
    if isinstance(fld, OccupancyGrid):
        payload = fld.occupied.astype(np.uint8).ravel(order="F").tobytes()
    elif isinstance(fld, ScalarField):
        payload = fld.values.astype("<f4").ravel(order="F").tobytes()
    elif isinstance(fld, VectorField):
        vec = fld.vectors.astype("<f4")
        payload = vec.transpose(2, 1, 0, 3).reshape(-1).tobytes()
    else:
        raise TypeError(f"cannot serialize {type(fld).__name__}")
    Path(path).write_bytes(header + payload)


def load_field(path):
    """Read a .vxf dump; the payload size determines the field kind."""
    raw = Path(path).read_bytes()
    magic, nx, ny, nz, res, ox, oy, oz = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise ValidationError(f"bad magic {magic!r} in {path}")
    spec = GridSpec(np.array([ox, oy, oz]), float(res), (nx, ny, nz))
    body = raw[_HEADER.size :]
    n = spec.num_voxels
    if len(body) == n:
        occ = np.frombuffer(body, dtype=np.uint8).reshape(spec.dims, order="F")
        return OccupancyGrid(spec, occ.astype(bool))
    if len(body) == 4 * n:
        vals = np.frombuffer(body, dtype="<f4").reshape(spec.dims, order="F")
        return ScalarField(spec, vals.astype(np.float64))
    if len(body) == 12 * n:
        vec = np.frombuffer(body, dtype="<f4").reshape((nz, ny, nx, 3))
        return VectorField(spec, vec.transpose(2, 1, 0, 3).astype(np.float64))
    raise ValidationError(f"payload size {len(body)} does not match dims {spec.dims}")
