import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from dualgrasp.geometry import closing_angle_deg
from dualgrasp.grasps import ParallelGrasp, VacuumGrasp, transform_parallel_grasp
from dualgrasp.primitives import Primitive
from dualgrasp.scenes import (
    NoContact,
    SceneAnnotation,
    SynthConfig,
    generate_scene,
    load_scene,
    oracle_parallel_quality,
    oracle_seal_quality,
    sample_ground_truth_grasps,
    save_scene,
)


def bare_scene(*prims, table_height=-1.0):
    """Annotation wrapper for oracle tests that need no cloud."""
    return SceneAnnotation(
        primitives=list(prims),
        table_height=table_height,
        camera_viewpoint=(0, 0, 1),
        per_point_object_id=np.zeros(0, dtype=int),
        per_point_flat=np.zeros(0, dtype=bool),
    )


def down_grasp(jaw_center, closing, width=0.09, depth=0.02):
    """Parallel grasp whose jaw line passes through jaw_center along closing."""
    closing = np.asarray(closing, dtype=float)
    v = np.array([0.0, 0.0, -1.0])
    assert abs(closing @ v) < 1e-9, "closing must be horizontal for this helper"
    center = np.asarray(jaw_center, dtype=float) - depth * v
    return ParallelGrasp(center=center, approach=v, angle_deg=closing_angle_deg(v, closing),
                         width=width, depth=depth)


# -- scene generation -----------------------------------------------------------


def test_generation_deterministic():
    cfg = SynthConfig()
    c1, s1 = generate_scene(11, 3, cfg)
    c2, s2 = generate_scene(11, 3, cfg)
    assert np.array_equal(c1.points, c2.points)
    assert np.array_equal(s1.per_point_object_id, s2.per_point_object_id)
    assert all(
        p.kind == q.kind and p.dimensions == q.dimensions and np.array_equal(p.translation, q.translation)
        for p, q in zip(s1.primitives, s2.primitives)
    )


def test_single_sphere_scene():
    cfg = SynthConfig(kinds=("sphere",))
    cloud, scene = generate_scene(5, 1, cfg)
    ids = np.unique(scene.per_point_object_id)
    assert set(ids) <= {0, 1}
    obj = scene.per_point_object_id == 1
    assert obj.any()
    assert np.all(cloud.points[obj, 2] >= cfg.table_height - 1e-9)
    assert scene.objects()[0].kind == "sphere"


def test_density_scaling():
    base = SynthConfig(density=20000.0)
    double = SynthConfig(density=40000.0)
    n1 = len(generate_scene(3, 2, base)[0])
    n2 = len(generate_scene(3, 2, double)[0])
    assert abs(n2 - 2 * n1) <= 0.1 * 2 * n1


def test_objects_do_not_interpenetrate():
    cfg = SynthConfig()
    _, scene = generate_scene(9, 5, cfg)
    objs = scene.objects()
    for i, a in enumerate(objs):
        for b in objs[i + 1 :]:
            gap = np.linalg.norm(a.translation[:2] - b.translation[:2])
            assert gap >= 1e-9  # centers distinct; xy circles checked at placement

    # hull check via samples: no object point lies strictly inside another object
    rng = np.random.default_rng(0)
    for a in objs:
        pts, _, _ = a.sample_surface(200, rng)
        for b in objs:
            if b is not a:
                assert not b.contains(pts, pad=-1e-9).any()


def test_cloud_points_face_camera():
    cfg = SynthConfig()
    cloud, scene = generate_scene(2, 3, cfg)
    # every kept point's primitive normal faces the viewpoint
    for prim in scene.primitives:
        mask = scene.per_point_object_id == prim.object_id
        if not mask.any():
            continue
        nrm = prim.surface_normal(cloud.points[mask])
        dots = np.sum(nrm * (cloud.viewpoint - cloud.points[mask]), axis=1)
        assert np.all(dots > 0)


def test_generation_failure_when_table_too_small():
    cfg = SynthConfig(table_extent=0.06, kinds=("box",), box_edge=(0.05, 0.06))
    with pytest.raises(Exception):
        generate_scene(0, 3, cfg)


# -- parallel force-closure oracle -------------------------------------------------


def test_sphere_diametral_grasp_zero_friction():
    sphere = Primitive("sphere", (0.03,), translation=(0, 0, 0.1))
    scene = bare_scene(sphere)
    g = down_grasp(jaw_center=(0, 0, 0.1), closing=(1, 0, 0), width=0.08)
    assert oracle_parallel_quality(scene, g) == pytest.approx(0.0, abs=1e-9)


def test_box_face_pair_zero_friction():
    box = Primitive("box", (0.04, 0.05, 0.03), translation=(0, 0, 0.2))
    scene = bare_scene(box)
    g = down_grasp(jaw_center=(0, 0, 0.2), closing=(1, 0, 0))
    assert oracle_parallel_quality(scene, g) == pytest.approx(0.0, abs=1e-9)


def test_box_30_degrees_off_normal():
    box = Primitive("box", (0.04, 0.04, 0.04), translation=(0, 0, 0))
    scene = bare_scene(box)
    a = np.deg2rad(30.0)
    g = down_grasp(jaw_center=(0, 0, 0), closing=(np.cos(a), np.sin(a), 0.0))
    assert oracle_parallel_quality(scene, g) == pytest.approx(np.tan(a), rel=1e-9)


def sampled_contact_mu(prim, jaw_center, closing, rng, n=200_000):
    """Independent oracle: contact normals from dense surface samples near the line."""
    pts, nrm, _ = prim.sample_surface(n, rng)
    closing = np.asarray(closing, dtype=float)
    rel = pts - jaw_center
    t = rel @ closing
    dist = np.linalg.norm(rel - np.outer(t, closing), axis=1)
    near = dist < 5e-4
    t_near = t[near]
    entry = near.nonzero()[0][np.argsort(t_near)[: max(1, near.sum() // 20)]]
    exit_ = near.nonzero()[0][np.argsort(-t_near)[: max(1, near.sum() // 20)]]
    mus = []
    for contact, sign in ((entry, -1.0), (exit_, +1.0)):
        n_avg = nrm[contact].mean(axis=0)
        n_avg /= np.linalg.norm(n_avg)
        cos = sign * closing @ n_avg
        mus.append(np.sqrt(max(0.0, 1 - cos**2)) / cos)
    return max(mus)


def test_sphere_offset_chord_matches_sampled_oracle(rng):
    R, h = 0.03, 0.015
    sphere = Primitive("sphere", (R,), translation=(0, 0, 0.1))
    scene = bare_scene(sphere)
    g = down_grasp(jaw_center=(0, h, 0.1), closing=(1, 0, 0), width=0.09)
    mu = oracle_parallel_quality(scene, g)
    assert mu == pytest.approx(h / np.sqrt(R * R - h * h), rel=1e-9)
    assert mu == pytest.approx(sampled_contact_mu(sphere, np.array([0, h, 0.1]), [1, 0, 0], rng), rel=0.05)


def test_no_contact_raises():
    sphere = Primitive("sphere", (0.02,), translation=(0, 0, 0.1))
    scene = bare_scene(sphere)
    g = down_grasp(jaw_center=(0.5, 0.5, 0.5), closing=(1, 0, 0))
    with pytest.raises(NoContact):
        oracle_parallel_quality(scene, g)


def test_object_wider_than_jaws_cannot_close():
    box = Primitive("box", (0.2, 0.05, 0.03), translation=(0, 0, 0))
    scene = bare_scene(box)
    g = down_grasp(jaw_center=(0, 0, 0), closing=(1, 0, 0), width=0.09)
    assert oracle_parallel_quality(scene, g) == np.inf


def test_rigid_invariance_of_parallel_oracle():
    box = Primitive("box", (0.04, 0.05, 0.03), translation=(0.02, -0.01, 0.12), rotation=(1, 0, 0, 0))
    scene = bare_scene(box)
    a = np.deg2rad(20.0)
    g = down_grasp(jaw_center=(0.02, -0.01, 0.12), closing=(np.cos(a), np.sin(a), 0))
    mu0 = oracle_parallel_quality(scene, g)

    rot = Rotation.from_euler("zyx", [0.7, 0.3, -0.2])
    quat_xyzw = rot.as_quat()
    quat = np.array([quat_xyzw[3], *quat_xyzw[:3]])
    shift = np.array([0.05, 0.02, 0.3])
    box_r = Primitive(
        "box", box.dimensions, rotation=quat, translation=rot.as_matrix() @ box.translation + shift
    )
    g_r = transform_parallel_grasp(g, rot.as_matrix(), shift)
    mu1 = oracle_parallel_quality(bare_scene(box_r), g_r)
    assert mu1 == pytest.approx(mu0, rel=1e-9, abs=1e-12)


# -- vacuum seal oracle ------------------------------------------------------------


def test_seal_on_large_flat_face():
    slab = Primitive("plane-slab", (0.2, 0.2, 0.01), translation=(0, 0, 0.005))
    scene = bare_scene(slab)
    g = VacuumGrasp(center=(0, 0, 0.01), normal=(0, 0, 1))
    assert oracle_seal_quality(scene, g, 0.01) == pytest.approx(1.0, abs=1e-9)


def test_seal_porous_is_zero():
    slab = Primitive("plane-slab", (0.2, 0.2, 0.01), translation=(0, 0, 0.005), porosity_flag=True)
    g = VacuumGrasp(center=(0, 0, 0.01), normal=(0, 0, 1))
    assert oracle_seal_quality(bare_scene(slab), g, 0.01) == 0.0


def test_seal_off_object_is_zero():
    slab = Primitive("plane-slab", (0.1, 0.1, 0.01), translation=(0, 0, 0.005))
    g = VacuumGrasp(center=(0.3, 0.3, 0.2), normal=(0, 0, 1))
    assert oracle_seal_quality(bare_scene(slab), g, 0.01) == 0.0


def spherical_cap_rms(R, rc):
    """Closed form: RMS tangent-plane deviation over the cap within chord rc."""
    cos_max = 1.0 - 2.0 * (rc / (2.0 * R)) ** 2
    return R * (1.0 - cos_max) / np.sqrt(3.0)


def sampled_cap_rms(R, rc, center, rng, n=400_000):
    """Independent dense-sampling oracle for the same quantity."""
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    pts = center + R * v
    top = center + np.array([0, 0, R])
    in_cup = np.linalg.norm(pts - top, axis=1) <= rc
    dev = (pts[in_cup] - top) @ np.array([0, 0, 1.0])
    return float(np.sqrt(np.mean(dev**2)))


def test_seal_on_sphere_matches_cap_integral(rng):
    R, rc = 0.02, 0.01
    sphere = Primitive("sphere", (R,), translation=(0, 0, 0.1))
    scene = bare_scene(sphere)
    g = VacuumGrasp(center=(0, 0, 0.1 + R), normal=(0, 0, 1))
    got = oracle_seal_quality(scene, g, rc)
    assert got == pytest.approx(1.0 - spherical_cap_rms(R, rc) / rc, abs=0.01)
    assert got == pytest.approx(1.0 - sampled_cap_rms(R, rc, np.array([0, 0, 0.1]), rng) / rc, abs=0.01)


def test_seal_monotone_in_sphere_radius():
    seals = []
    for R in (0.015, 0.025, 0.04, 0.08):
        sphere = Primitive("sphere", (R,), translation=(0, 0, 0.1))
        g = VacuumGrasp(center=(0, 0, 0.1 + R), normal=(0, 0, 1))
        seals.append(oracle_seal_quality(bare_scene(sphere), g, 0.01))
    assert all(seals[i] < seals[i + 1] for i in range(len(seals) - 1))


# -- ground-truth grasps and persistence ----------------------------------------------


def test_gt_grasps_deterministic_and_scored(small_scene):
    _, scene, grasps, cfg = small_scene
    again = sample_ground_truth_grasps(scene, cfg, seed=42)
    assert len(grasps) == len(again)
    for a, b in zip(grasps, again):
        assert a.gripper == b.gripper
        assert a.quality_coeff == b.quality_coeff
        assert np.array_equal(a.pose.center, b.pose.center)
    for g in grasps:
        assert g.quality_coeff >= 0
        if g.gripper == "parallel":
            assert g.pose.width <= cfg.max_width + 1e-12
            assert np.isfinite(g.quality_coeff)


def test_scene_roundtrip(tmp_path, small_scene):
    cloud, scene, grasps, _ = small_scene
    stem = tmp_path / "scene_0000"
    save_scene(stem, cloud, scene, grasps)
    cloud2, scene2, grasps2 = load_scene(stem)
    assert np.allclose(cloud2.points, cloud.points, atol=1e-6)  # float32 storage
    assert np.array_equal(scene2.per_point_object_id, scene.per_point_object_id)
    assert np.array_equal(scene2.per_point_flat, scene.per_point_flat)
    assert len(grasps2) == len(grasps)
    assert all(p.kind == q.kind for p, q in zip(scene2.primitives, scene.primitives))
    assert grasps2[0].quality_coeff == pytest.approx(grasps[0].quality_coeff)


def test_save_scene_byte_identical(tmp_path, small_scene):
    cloud, scene, grasps, _ = small_scene
    save_scene(tmp_path / "a", cloud, scene, grasps)
    save_scene(tmp_path / "b", cloud, scene, grasps)
    assert (tmp_path / "a.ply").read_bytes() == (tmp_path / "b.ply").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
