"""Geometric primitives with analytic surface sampling, line intersection, and normals.

All primitive math happens in the primitive's local frame (pose = rotation
quaternion + translation). Supported kinds: box, sphere, cylinder (axis +z),
and plane-slab (a thin box, used for flat tiles and the table).
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import quat_to_matrix

KINDS = ("box", "sphere", "cylinder", "plane-slab")
_BOX_LIKE = ("box", "plane-slab")


@dataclass
class Primitive:
    """A rigid scene object: shape, pose, and grasp-relevant material flags.

    dimensions by kind:
      box / plane-slab: (sx, sy, sz) full edge lengths [m]
      sphere:           (radius,)
      cylinder:         (radius, height), axis along local +z
    friction_coeff is the surface friction available for parallel grasping;
    porosity_flag disables vacuum sealing entirely.
    """

    kind: str
    dimensions: tuple
    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    object_id: int = 1
    friction_coeff: float = 0.8
    porosity_flag: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        self.dimensions = tuple(float(d) for d in self.dimensions)
        expected = {"box": 3, "plane-slab": 3, "sphere": 1, "cylinder": 2}[self.kind]
        if len(self.dimensions) != expected:
            raise ValueError(f"{self.kind} needs {expected} dimensions, got {len(self.dimensions)}")
        if any(d <= 0 for d in self.dimensions):
            raise ValueError(f"dimensions must be strictly positive: {self.dimensions}")
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not 0.0 < self.friction_coeff <= 1.2:
            raise ValueError(f"friction_coeff must be in (0, 1.2], got {self.friction_coeff}")
        self._rot = quat_to_matrix(self.rotation)

    # -- frames -------------------------------------------------------------

    def to_local(self, points: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(points) - self.translation) @ self._rot

    def to_world(self, points: np.ndarray) -> np.ndarray:
        return np.atleast_2d(points) @ self._rot.T + self.translation

    def dirs_to_local(self, dirs: np.ndarray) -> np.ndarray:
        return np.atleast_2d(dirs) @ self._rot

    def dirs_to_world(self, dirs: np.ndarray) -> np.ndarray:
        return np.atleast_2d(dirs) @ self._rot.T

    # -- shape measures -----------------------------------------------------

    def surface_area(self) -> float:
        if self.kind in _BOX_LIKE:
            sx, sy, sz = self.dimensions
            return 2.0 * (sx * sy + sy * sz + sz * sx)
        if self.kind == "sphere":
            (r,) = self.dimensions
            return 4.0 * np.pi * r * r
        r, h = self.dimensions
        return 2.0 * np.pi * r * h + 2.0 * np.pi * r * r

    def bounding_radius(self) -> float:
        """Radius of the bounding sphere centered at the primitive's translation."""
        if self.kind in _BOX_LIKE:
            return float(np.linalg.norm(np.asarray(self.dimensions) / 2.0))
        if self.kind == "sphere":
            return self.dimensions[0]
        r, h = self.dimensions
        return float(np.hypot(r, h / 2.0))

    # -- surface sampling ---------------------------------------------------

    def sample_surface(self, count: int, rng: np.random.Generator):
        """Area-uniform surface samples.

        Returns (points, normals, flat) in world coordinates; flat marks
        samples that lie on a planar face (box faces, cylinder caps).
        """
        if self.kind in _BOX_LIKE:
            pts, nrm, flat = _sample_box(self.dimensions, count, rng)
        elif self.kind == "sphere":
            pts, nrm, flat = _sample_sphere(self.dimensions[0], count, rng)
        else:
            pts, nrm, flat = _sample_cylinder(*self.dimensions, count, rng)
        return self.to_world(pts), self.dirs_to_world(nrm), flat

    # -- analytic queries ---------------------------------------------------

    def line_intersections(self, origins: np.ndarray, dirs: np.ndarray):
        """Intersect M infinite lines (unit dirs) with the surface.

        Returns (t0, t1, hit): entry/exit parameters per line (t0 <= t1) and a
        bool mask. Tangent touches (t1 - t0 ~ 0) count as misses.
        """
        o = self.to_local(origins)
        d = self.dirs_to_local(dirs)
        if self.kind in _BOX_LIKE:
            t0, t1, hit = _intersect_box(np.asarray(self.dimensions) / 2.0, o, d)
        elif self.kind == "sphere":
            t0, t1, hit = _intersect_sphere(self.dimensions[0], o, d)
        else:
            t0, t1, hit = _intersect_cylinder(*self.dimensions, o, d)
        hit = hit & ((t1 - t0) > 1e-9)
        return t0, t1, hit

    def surface_normal(self, points: np.ndarray) -> np.ndarray:
        """Outward normals at world points on (or near) the surface."""
        p = self.to_local(points)
        if self.kind in _BOX_LIKE:
            n = _box_normal(np.asarray(self.dimensions) / 2.0, p)
        elif self.kind == "sphere":
            norms = np.linalg.norm(p, axis=1, keepdims=True)
            n = p / np.maximum(norms, 1e-12)
        else:
            n = _cylinder_normal(*self.dimensions, p)
        return self.dirs_to_world(n)

    def surface_distance(self, points: np.ndarray) -> np.ndarray:
        """Unsigned distance from world points to the surface."""
        p = self.to_local(points)
        if self.kind in _BOX_LIKE:
            sd = _box_sdf(np.asarray(self.dimensions) / 2.0, p)
        elif self.kind == "sphere":
            sd = np.linalg.norm(p, axis=1) - self.dimensions[0]
        else:
            sd = _cylinder_sdf(*self.dimensions, p)
        return np.abs(sd)

    def contains(self, points: np.ndarray, pad: float = 0.0) -> np.ndarray:
        """Bool mask: world points strictly inside the surface expanded by pad."""
        p = self.to_local(points)
        if self.kind in _BOX_LIKE:
            sd = _box_sdf(np.asarray(self.dimensions) / 2.0, p)
        elif self.kind == "sphere":
            sd = np.linalg.norm(p, axis=1) - self.dimensions[0]
        else:
            sd = _cylinder_sdf(*self.dimensions, p)
        return sd < -pad if pad <= 0 else sd < pad


# -- local-frame implementations ---------------------------------------------


def _sample_box(dims, count, rng):
    sx, sy, sz = dims
    areas = np.array([sy * sz, sy * sz, sx * sz, sx * sz, sx * sy, sx * sy])
    face = rng.choice(6, size=count, p=areas / areas.sum())
    u = rng.uniform(-0.5, 0.5, size=(count, 2))
    pts = np.zeros((count, 3))
    nrm = np.zeros((count, 3))
    half = np.array([sx, sy, sz]) / 2.0
    axis = face // 2  # 0:x faces, 1:y faces, 2:z faces
    sign = np.where(face % 2 == 0, 1.0, -1.0)
    others = np.array([[1, 2], [0, 2], [0, 1]])
    for a in range(3):
        m = axis == a
        if not np.any(m):
            continue
        o1, o2 = others[a]
        pts[m, a] = sign[m] * half[a]
        pts[m, o1] = u[m, 0] * dims[o1]
        pts[m, o2] = u[m, 1] * dims[o2]
        nrm[m, a] = sign[m]
    return pts, nrm, np.ones(count, dtype=bool)


def _sample_sphere(radius, count, rng):
    v = rng.normal(size=(count, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return radius * v, v, np.zeros(count, dtype=bool)


def _sample_cylinder(radius, height, count, rng):
    a_side = 2.0 * np.pi * radius * height
    a_cap = np.pi * radius * radius
    comp = rng.choice(3, size=count, p=np.array([a_side, a_cap, a_cap]) / (a_side + 2 * a_cap))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=count)
    pts = np.zeros((count, 3))
    nrm = np.zeros((count, 3))
    flat = np.zeros(count, dtype=bool)

    side = comp == 0
    pts[side, 0] = radius * np.cos(theta[side])
    pts[side, 1] = radius * np.sin(theta[side])
    pts[side, 2] = rng.uniform(-height / 2.0, height / 2.0, size=int(side.sum()))
    nrm[side, 0] = np.cos(theta[side])
    nrm[side, 1] = np.sin(theta[side])

    for which, zsign in ((comp == 1, 1.0), (comp == 2, -1.0)):
        k = int(which.sum())
        if k == 0:
            continue
        rr = radius * np.sqrt(rng.uniform(0.0, 1.0, size=k))
        pts[which, 0] = rr * np.cos(theta[which])
        pts[which, 1] = rr * np.sin(theta[which])
        pts[which, 2] = zsign * height / 2.0
        nrm[which, 2] = zsign
        flat[which] = True
    return pts, nrm, flat


def _intersect_box(half, o, d):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        ta = (-half - o) * inv
        tb = (half - o) * inv
    lo = np.minimum(ta, tb)
    hi = np.maximum(ta, tb)
    # Parallel-to-slab axes: inside -> unbounded, outside -> empty interval.
    par = np.abs(d) < 1e-12
    inside = np.abs(o) <= half
    lo = np.where(par, np.where(inside, -np.inf, np.inf), lo)
    hi = np.where(par, np.where(inside, np.inf, -np.inf), hi)
    t0 = lo.max(axis=1)
    t1 = hi.min(axis=1)
    hit = (t0 < t1) & np.isfinite(t0) & np.isfinite(t1)
    return t0, t1, hit


def _intersect_sphere(radius, o, d):
    b = np.sum(o * d, axis=1)
    c = np.sum(o * o, axis=1) - radius * radius
    disc = b * b - c
    hit = disc > 0
    s = np.sqrt(np.maximum(disc, 0.0))
    return -b - s, -b + s, hit


def _intersect_cylinder(radius, height, o, d):
    m = len(o)
    cand_t = np.full((m, 4), np.nan)
    # Side surface: quadratic in the xy-plane.
    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1]
    c = o[:, 0] ** 2 + o[:, 1] ** 2 - radius * radius
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = b * b - a * c
        s = np.sqrt(np.maximum(disc, 0.0))
        q_ok = (a > 1e-14) & (disc > 0)
        for j, sgn in enumerate((-1.0, 1.0)):
            t = np.where(q_ok, (-b + sgn * s) / np.where(q_ok, a, 1.0), np.nan)
            z = o[:, 2] + t * d[:, 2]
            cand_t[:, j] = np.where(q_ok & (np.abs(z) <= height / 2.0), t, np.nan)
        # Caps at z = +-h/2.
        dz_ok = np.abs(d[:, 2]) > 1e-12
        for j, zc in enumerate((height / 2.0, -height / 2.0)):
            t = np.where(dz_ok, (zc - o[:, 2]) / np.where(dz_ok, d[:, 2], 1.0), np.nan)
            x = o[:, 0] + t * d[:, 0]
            y = o[:, 1] + t * d[:, 1]
            cand_t[:, 2 + j] = np.where(dz_ok & (x * x + y * y <= radius * radius), t, np.nan)
    n_hits = np.sum(~np.isnan(cand_t), axis=1)
    hit = n_hits >= 2
    t0 = np.nanmin(np.where(np.isnan(cand_t), np.inf, cand_t), axis=1)
    t1 = np.nanmax(np.where(np.isnan(cand_t), -np.inf, cand_t), axis=1)
    return np.where(hit, t0, 0.0), np.where(hit, t1, 0.0), hit


def _box_normal(half, p):
    # Face whose plane the point is closest to wins.
    gap = half - np.abs(p)
    axis = np.argmin(gap, axis=1)
    n = np.zeros_like(p)
    rows = np.arange(len(p))
    n[rows, axis] = np.sign(p[rows, axis])
    n[rows, axis] = np.where(n[rows, axis] == 0.0, 1.0, n[rows, axis])
    return n


def _cylinder_normal(radius, height, p):
    r = np.linalg.norm(p[:, :2], axis=1)
    side_gap = np.abs(radius - r)
    cap_gap = np.abs(height / 2.0 - np.abs(p[:, 2]))
    n = np.zeros_like(p)
    use_cap = cap_gap < side_gap
    safe_r = np.maximum(r, 1e-12)
    n[:, 0] = np.where(use_cap, 0.0, p[:, 0] / safe_r)
    n[:, 1] = np.where(use_cap, 0.0, p[:, 1] / safe_r)
    n[:, 2] = np.where(use_cap, np.sign(p[:, 2]), 0.0)
    n[:, 2] = np.where(use_cap & (n[:, 2] == 0.0), 1.0, n[:, 2])
    return n


def _box_sdf(half, p):
    q = np.abs(p) - half
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
    inside = np.minimum(np.max(q, axis=1), 0.0)
    return outside + inside


def _cylinder_sdf(radius, height, p):
    qr = np.linalg.norm(p[:, :2], axis=1) - radius
    qz = np.abs(p[:, 2]) - height / 2.0
    q = np.column_stack([qr, qz])
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
    inside = np.minimum(np.max(q, axis=1), 0.0)
    return outside + inside
