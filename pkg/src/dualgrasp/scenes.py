"""Synthetic tabletop scenes of geometric primitives with analytic grasp-quality oracles.

A scene is a table slab (object id 0) plus rigid primitives resting on it.
The cloud is a simulated single-view depth sample: area-uniform surface points
kept when their outward normal faces the camera viewpoint. Ground-truth grasp
candidates are sampled on the object models and scored by the two oracles:
minimum required friction for antipodal force closure (parallel) and a
planarity-based seal coefficient (vacuum).
"""

import json
from collections import namedtuple
from dataclasses import dataclass, replace

import numpy as np

from .cloud import PointCloud
from .geometry import closing_angle_deg, normalize, yaw_quat
from .grasps import (
    PARALLEL,
    VACUUM,
    ParallelGrasp,
    VacuumGrasp,
    grasp_from_dict,
    grasp_to_dict,
)
from .ply_io import read_ply, write_ply
from .primitives import Primitive

SCENE_SCHEMA_VERSION = 1
_SEAL_RNG_SEED = 715_225_739  # fixed: the seal oracle must be a pure function


class SceneGenerationError(RuntimeError):
    """Object placement failed after the configured number of retries."""


class NoContact(ValueError):
    """The jaw closing line does not intersect any object."""


@dataclass
class SynthConfig:
    """Knobs for scene generation and the gripper/oracle geometry."""

    kinds: tuple = ("box", "sphere", "cylinder", "plane-slab")
    kind_sequence: tuple = None  # exact per-object kinds (cycled); overrides random choice
    table_extent: float = 0.5
    table_thickness: float = 0.02
    table_height: float = 0.0
    camera_viewpoint: tuple = (0.12, -0.08, 0.85)
    density: float = 40000.0  # surface points per m^2
    box_edge: tuple = (0.03, 0.08)
    sphere_radius: tuple = (0.015, 0.04)
    cylinder_radius: tuple = (0.015, 0.035)
    cylinder_height: tuple = (0.03, 0.08)
    slab_extent: tuple = (0.07, 0.12)
    slab_thickness: tuple = (0.008, 0.015)
    friction_range: tuple = (0.4, 1.0)
    porous_prob: float = 0.0
    placement_gap: float = 0.02
    max_retries: int = 400
    # gripper geometry shared by oracles, label building, and refinement
    max_width: float = 0.1
    cup_radius: float = 0.01
    # ground-truth grasp candidate sampling
    vacuum_grasps_per_object: int = 96
    parallel_grasps_per_object: int = 96
    gt_depth: float = 0.02
    gt_mu_cap: float = 1.5
    width_margin: float = 0.005
    # seal oracle sampling
    seal_sample_density: float = 1.0e6
    seal_sample_limits: tuple = (2000, 60000)
    on_surface_tol: float = 0.002


@dataclass
class SceneAnnotation:
    """Ground truth for one scene: primitives and per-point provenance.

    per_point_object_id is aligned with the cloud (0 = table/background);
    per_point_flat marks points sampled from planar faces.
    """

    primitives: list
    table_height: float
    camera_viewpoint: np.ndarray
    per_point_object_id: np.ndarray
    per_point_flat: np.ndarray
    split: str = "default"

    def __post_init__(self):
        self.camera_viewpoint = np.asarray(self.camera_viewpoint, dtype=np.float64).reshape(3)
        self.per_point_object_id = np.asarray(self.per_point_object_id, dtype=np.intp)
        self.per_point_flat = np.asarray(self.per_point_flat, dtype=bool)
        ids = {p.object_id for p in self.primitives}
        for oid in np.unique(self.per_point_object_id):
            if oid != 0 and int(oid) not in ids:
                raise ValueError(f"per-point object id {oid} has no primitive")

    def objects(self) -> list:
        return [p for p in self.primitives if p.object_id != 0]

    def primitive_by_id(self, object_id: int) -> Primitive:
        for p in self.primitives:
            if p.object_id == object_id:
                return p
        raise KeyError(f"no primitive with object id {object_id}")


@dataclass
class GroundTruthGrasp:
    gripper: str
    pose: object  # ParallelGrasp or VacuumGrasp
    quality_coeff: float  # required friction (parallel) or seal coefficient (vacuum)

    def __post_init__(self):
        if self.quality_coeff < 0:
            raise ValueError("quality_coeff must be >= 0")


# -- scene generation ---------------------------------------------------------


def _xy_radius(prim: Primitive) -> float:
    if prim.kind in ("box", "plane-slab"):
        return float(np.hypot(prim.dimensions[0], prim.dimensions[1]) / 2.0)
    return prim.dimensions[0]


def _sample_object(kind: str, cfg: SynthConfig, rng: np.random.Generator, object_id: int) -> Primitive:
    if kind == "box":
        dims = tuple(rng.uniform(*cfg.box_edge, size=3))
        z = dims[2] / 2.0
    elif kind == "sphere":
        dims = (rng.uniform(*cfg.sphere_radius),)
        z = dims[0]
    elif kind == "cylinder":
        dims = (rng.uniform(*cfg.cylinder_radius), rng.uniform(*cfg.cylinder_height))
        z = dims[1] / 2.0
    elif kind == "plane-slab":
        dims = (rng.uniform(*cfg.slab_extent), rng.uniform(*cfg.slab_extent), rng.uniform(*cfg.slab_thickness))
        z = dims[2] / 2.0
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return Primitive(
        kind=kind,
        dimensions=dims,
        rotation=yaw_quat(rng.uniform(0.0, 2.0 * np.pi)),
        translation=np.array([0.0, 0.0, cfg.table_height + z]),
        object_id=object_id,
        friction_coeff=rng.uniform(*cfg.friction_range),
        porosity_flag=bool(rng.uniform() < cfg.porous_prob),
    )


def generate_scene(seed, n_objects: int, config: SynthConfig = None):
    """Deterministic synthetic scene: (PointCloud, SceneAnnotation).

    Objects rest on the table without interpenetration (rejection sampling on
    xy bounding circles). The cloud keeps only camera-facing surface points
    and drops points buried inside another primitive.
    """
    if n_objects < 1:
        raise ValueError("n_objects must be >= 1")
    cfg = config or SynthConfig()
    rng = np.random.default_rng(seed)
    viewpoint = np.asarray(cfg.camera_viewpoint, dtype=np.float64)

    table = Primitive(
        kind="plane-slab",
        dimensions=(cfg.table_extent, cfg.table_extent, cfg.table_thickness),
        translation=np.array([0.0, 0.0, cfg.table_height - cfg.table_thickness / 2.0]),
        object_id=0,
        friction_coeff=0.6,
        porosity_flag=True,
    )
    prims = [table]

    placed = []  # (xy, radius)
    for i in range(n_objects):
        if cfg.kind_sequence:
            kind = cfg.kind_sequence[i % len(cfg.kind_sequence)]
        else:
            kind = cfg.kinds[rng.integers(len(cfg.kinds))]
        prim = _sample_object(kind, cfg, rng, object_id=i + 1)
        r = _xy_radius(prim)
        limit = cfg.table_extent / 2.0 - r - 0.01
        if limit <= 0:
            raise SceneGenerationError(f"object {i + 1} ({kind}) too large for the table")
        for attempt in range(cfg.max_retries + 1):
            if attempt == cfg.max_retries:
                raise SceneGenerationError(f"could not place object {i + 1} after {cfg.max_retries} tries")
            xy = rng.uniform(-limit, limit, size=2)
            if all(np.hypot(*(xy - q)) >= r + rq + cfg.placement_gap for q, rq in placed):
                break
        placed.append((xy, r))
        prim.translation[:2] = xy
        prims.append(prim)

    all_pts, all_ids, all_flat = [], [], []
    for prim in prims:
        count = max(64, int(round(prim.surface_area() * cfg.density)))
        pts, nrm, flat = prim.sample_surface(count, rng)
        facing = np.sum(nrm * (viewpoint - pts), axis=1) > 1e-9
        buried = np.zeros(len(pts), dtype=bool)
        for other in prims:
            if other is prim:
                continue
            buried |= other.contains(pts, pad=1e-7)
        keep = facing & ~buried
        all_pts.append(pts[keep])
        all_ids.append(np.full(int(keep.sum()), prim.object_id, dtype=np.intp))
        all_flat.append(flat[keep])

    points = np.concatenate(all_pts, axis=0)
    cloud = PointCloud(points, viewpoint=viewpoint)
    annotation = SceneAnnotation(
        primitives=prims,
        table_height=cfg.table_height,
        camera_viewpoint=viewpoint,
        per_point_object_id=np.concatenate(all_ids),
        per_point_flat=np.concatenate(all_flat),
    )
    return cloud, annotation


def remove_object(cloud: PointCloud, scene: SceneAnnotation, object_id: int):
    """Scene state after clearing an object: its points and primitive removed."""
    keep = scene.per_point_object_id != object_id
    if not np.any(keep):
        raise ValueError("removing this object would empty the cloud")
    new_cloud = PointCloud(cloud.points[keep], viewpoint=cloud.viewpoint)
    new_scene = replace(
        scene,
        primitives=[p for p in scene.primitives if p.object_id != object_id],
        per_point_object_id=scene.per_point_object_id[keep],
        per_point_flat=scene.per_point_flat[keep],
    )
    return new_cloud, new_scene


# -- parallel (force closure) oracle ------------------------------------------

ContactBatch = namedtuple("ContactBatch", ["mu", "object_id", "t0", "t1", "hit"])


def parallel_quality_batch(scene: SceneAnnotation, jaw_centers, closing_dirs, widths) -> ContactBatch:
    """Vectorized required-friction evaluation for M candidate jaw lines.

    mu is the minimum friction coefficient for antipodal force closure at the
    two jaw-line/surface contacts (np.inf when the contacts cannot close:
    won't fit inside the jaw span, or a contact normal has no component
    opposing the closing force). hit marks lines that intersect at least one
    object; among several, the object whose chord is centered closest to the
    jaw center wins. t0/t1 are the chord parameters on the winning object.
    """
    q = np.atleast_2d(np.asarray(jaw_centers, dtype=np.float64))
    u = np.atleast_2d(np.asarray(closing_dirs, dtype=np.float64))
    u = u / np.linalg.norm(u, axis=1, keepdims=True)
    w = np.broadcast_to(np.asarray(widths, dtype=np.float64), (len(q),))

    m = len(q)
    best_mid = np.full(m, np.inf)
    best_t0 = np.zeros(m)
    best_t1 = np.zeros(m)
    best_id = np.full(m, -1, dtype=np.intp)
    hit_any = np.zeros(m, dtype=bool)

    objs = scene.objects()
    for prim in objs:
        # Bounding-sphere prefilter: a line that stays farther from the center
        # than the bounding radius cannot touch the surface (exact superset).
        rel = prim.translation - q
        along = np.sum(rel * u, axis=1)
        d2 = np.sum(rel * rel, axis=1) - along * along
        cand = np.flatnonzero(d2 <= prim.bounding_radius() ** 2 + 1e-12)
        if len(cand) == 0:
            continue
        t0c, t1c, hitc = prim.line_intersections(q[cand], u[cand])
        with np.errstate(invalid="ignore"):
            midc = np.where(hitc, np.abs((t0c + t1c) / 2.0), np.inf)
        betterc = hitc & (midc < best_mid[cand])
        rows = cand[betterc]
        best_mid[rows] = midc[betterc]
        best_t0[rows] = t0c[betterc]
        best_t1[rows] = t1c[betterc]
        best_id[rows] = prim.object_id
        hit_any[cand] |= hitc

    mu = np.full(m, np.inf)
    for prim in objs:
        sel = hit_any & (best_id == prim.object_id)
        if not np.any(sel):
            continue
        c0 = q[sel] + best_t0[sel, None] * u[sel]
        c1 = q[sel] + best_t1[sel, None] * u[sel]
        n0 = prim.surface_normal(c0)
        n1 = prim.surface_normal(c1)
        cos0 = -np.sum(u[sel] * n0, axis=1)
        cos1 = np.sum(u[sel] * n1, axis=1)
        cmin = np.minimum(cos0, cos1)
        with np.errstate(divide="ignore", invalid="ignore"):
            tan0 = np.sqrt(np.maximum(0.0, 1.0 - cos0**2)) / cos0
            tan1 = np.sqrt(np.maximum(0.0, 1.0 - cos1**2)) / cos1
        mu_sel = np.where(cmin > 1e-9, np.maximum(tan0, tan1), np.inf)
        fits = (best_t0[sel] >= -w[sel] / 2.0 - 1e-9) & (best_t1[sel] <= w[sel] / 2.0 + 1e-9)
        mu[sel] = np.where(fits, mu_sel, np.inf)

    return ContactBatch(mu=mu, object_id=best_id, t0=best_t0, t1=best_t1, hit=hit_any)


def oracle_parallel_quality(scene: SceneAnnotation, grasp: ParallelGrasp) -> float:
    """Minimum friction coefficient at which the grasp achieves force closure.

    Lower is better; np.inf means the intersected object cannot be closed on.
    Raises NoContact when the jaw line misses every object.
    """
    res = parallel_quality_batch(
        scene, grasp.jaw_center()[None, :], grasp.closing_dir()[None, :], np.array([grasp.width])
    )
    if not res.hit[0]:
        raise NoContact("jaw closing line misses all objects")
    return float(res.mu[0])


def friction_to_graspness(mu, mu_max: float = 1.0):
    """Map required friction to a [0, 1] graspness score (1 = frictionless closure)."""
    mu = np.asarray(mu, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        g = np.where(np.isfinite(mu), np.clip(1.0 - mu / mu_max, 0.0, 1.0), 0.0)
    return g if g.ndim else float(g)


# -- vacuum (seal) oracle ------------------------------------------------------


def _owning_object(scene: SceneAnnotation, point: np.ndarray, tol: float):
    best, best_d = None, np.inf
    for prim in scene.objects():
        d = float(prim.surface_distance(point[None, :])[0])
        if d < best_d:
            best, best_d = prim, d
    if best is None or best_d > tol:
        return None
    return best


_SEAL_SAMPLE_CACHE = {}


def _seal_surface_samples(prim: Primitive, count: int) -> np.ndarray:
    """World-frame surface samples for the seal oracle, cached per shape.

    Samples are drawn once per (kind, dimensions, count) in the local frame
    with a fixed seed, then posed; the oracle stays a pure function.
    """
    key = (prim.kind, prim.dimensions, count)
    local = _SEAL_SAMPLE_CACHE.get(key)
    if local is None:
        if len(_SEAL_SAMPLE_CACHE) > 64:
            _SEAL_SAMPLE_CACHE.clear()
        rng = np.random.default_rng(_SEAL_RNG_SEED)
        reference = Primitive(prim.kind, prim.dimensions, object_id=max(1, prim.object_id))
        local, _, _ = reference.sample_surface(count, rng)
        _SEAL_SAMPLE_CACHE[key] = local
    return prim.to_world(local)


def oracle_seal_quality(scene: SceneAnnotation, grasp: VacuumGrasp, cup_radius: float = 0.01,
                        config: SynthConfig = None) -> float:
    """Seal coefficient in [0, 1] from surface planarity under the suction cup.

    seal = max(0, 1 - RMS / cup_radius) where RMS is the root-mean-square
    deviation of surface points within cup_radius of the center from the
    tangent plane there. Returns 0 for porous objects and centers that are not
    within 2 mm of an object surface.
    """
    cfg = config or SynthConfig()
    c = np.asarray(grasp.center, dtype=np.float64)
    prim = _owning_object(scene, c, cfg.on_surface_tol)
    if prim is None or prim.porosity_flag:
        return 0.0
    lo, hi = cfg.seal_sample_limits
    count = int(np.clip(prim.surface_area() * cfg.seal_sample_density, lo, hi))
    pts = _seal_surface_samples(prim, count)
    in_cup = np.linalg.norm(pts - c, axis=1) <= cup_radius
    if not np.any(in_cup):
        return 0.0
    n = prim.surface_normal(c[None, :])[0]
    dev = (pts[in_cup] - c) @ n
    rms = float(np.sqrt(np.mean(dev**2)))
    return max(0.0, 1.0 - rms / cup_radius)


# -- ground-truth grasp candidates ---------------------------------------------


def _perpendicular_approach(u: np.ndarray) -> np.ndarray:
    """Deterministic approach direction perpendicular to a closing direction.

    Prefers the downward direction (top grasps); falls back to +x for
    near-vertical closing lines.
    """
    down = np.array([0.0, 0.0, -1.0])
    v = down - np.dot(down, u) * u
    if np.linalg.norm(v) < 1e-6:
        v = np.array([1.0, 0.0, 0.0]) - u[0] * u
    return normalize(v)


def sample_ground_truth_grasps(scene: SceneAnnotation, config: SynthConfig = None, seed=0):
    """Candidate grasps on the object models, scored by the analytic oracles.

    Vacuum candidates sit at surface samples with the analytic normal and the
    oracle seal as quality. Parallel candidates close along the inward surface
    normal at a sample; the jaw line's chord through the object gives contact
    separation (kept only if it fits the gripper) and the required-friction
    quality. Deterministic for a given (scene, config, seed).
    """
    cfg = config or SynthConfig()
    rng = np.random.default_rng(seed)
    grasps = []
    for prim in scene.objects():
        pts_v, nrm_v, _ = prim.sample_surface(cfg.vacuum_grasps_per_object, rng)
        for p, n in zip(pts_v, nrm_v):
            pose = VacuumGrasp(center=p, normal=n)
            seal = oracle_seal_quality(scene, pose, cfg.cup_radius, cfg)
            pose.score = seal
            grasps.append(GroundTruthGrasp(gripper=VACUUM, pose=pose, quality_coeff=seal))

        pts_p, nrm_p, _ = prim.sample_surface(cfg.parallel_grasps_per_object, rng)
        closing = -nrm_p
        t0, t1, hit = prim.line_intersections(pts_p, closing)
        mids = pts_p + ((t0 + t1) / 2.0)[:, None] * closing
        sep = t1 - t0
        mu = parallel_quality_batch(scene, mids, closing, np.full(len(mids), cfg.max_width)).mu
        for i in range(len(pts_p)):
            if not hit[i] or sep[i] + cfg.width_margin > cfg.max_width:
                continue
            if not np.isfinite(mu[i]) or mu[i] > cfg.gt_mu_cap:
                continue
            u = closing[i] / np.linalg.norm(closing[i])
            v = _perpendicular_approach(u)
            pose = ParallelGrasp(
                center=mids[i] - cfg.gt_depth * v,
                approach=v,
                angle_deg=closing_angle_deg(v, u),
                width=min(cfg.max_width, float(sep[i]) + cfg.width_margin),
                depth=cfg.gt_depth,
                score=friction_to_graspness(mu[i]),
            )
            grasps.append(GroundTruthGrasp(gripper=PARALLEL, pose=pose, quality_coeff=float(mu[i])))
    return grasps


# -- persistence ---------------------------------------------------------------


def scene_to_dict(scene: SceneAnnotation, grasps=None) -> dict:
    return {
        "schema_version": SCENE_SCHEMA_VERSION,
        "table_height": float(scene.table_height),
        "camera_viewpoint": [float(x) for x in scene.camera_viewpoint],
        "split": scene.split,
        "point_channels": ["object_id", "flat"],
        "primitives": [
            {
                "kind": p.kind,
                "dimensions": list(p.dimensions),
                "rotation": [float(x) for x in p.rotation],
                "translation": [float(x) for x in p.translation],
                "object_id": int(p.object_id),
                "friction_coeff": float(p.friction_coeff),
                "porosity_flag": bool(p.porosity_flag),
            }
            for p in scene.primitives
        ],
        "grasps": [
            dict(grasp_to_dict(g.pose), quality=float(g.quality_coeff)) for g in (grasps or [])
        ],
    }


def save_scene(path_stem, cloud: PointCloud, scene: SceneAnnotation, grasps=None):
    """Write <stem>.ply (cloud + per-point channels) and <stem>.json (annotation + grasps)."""
    stem = str(path_stem)
    write_ply(
        stem + ".ply",
        cloud.points,
        channels={
            "object_id": scene.per_point_object_id.astype(np.float32),
            "flat": scene.per_point_flat.astype(np.float32),
        },
    )
    with open(stem + ".json", "w") as f:
        json.dump(scene_to_dict(scene, grasps), f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def load_scene(path_stem):
    """Inverse of save_scene: returns (cloud, annotation, ground-truth grasps)."""
    stem = str(path_stem)
    points, _, channels = read_ply(stem + ".ply")
    with open(stem + ".json") as f:
        doc = json.load(f)
    if doc.get("schema_version") != SCENE_SCHEMA_VERSION:
        raise ValueError(f"{stem}.json: unsupported schema_version {doc.get('schema_version')!r}")
    prims = [
        Primitive(
            kind=d["kind"],
            dimensions=tuple(d["dimensions"]),
            rotation=np.array(d["rotation"]),
            translation=np.array(d["translation"]),
            object_id=d["object_id"],
            friction_coeff=d["friction_coeff"],
            porosity_flag=d["porosity_flag"],
        )
        for d in doc["primitives"]
    ]
    viewpoint = np.array(doc["camera_viewpoint"])
    cloud = PointCloud(points.astype(np.float64), viewpoint=viewpoint)
    scene = SceneAnnotation(
        primitives=prims,
        table_height=doc["table_height"],
        camera_viewpoint=viewpoint,
        per_point_object_id=channels["object_id"].astype(np.intp),
        per_point_flat=channels["flat"] > 0.5,
        split=doc.get("split", "default"),
    )
    grasps = []
    for d in doc["grasps"]:
        pose = grasp_from_dict(d)
        grasps.append(GroundTruthGrasp(gripper=pose.gripper, pose=pose, quality_coeff=d["quality"]))
    return cloud, scene, grasps
