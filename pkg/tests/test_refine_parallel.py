import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from dualgrasp.cloud import PointCloud
from dualgrasp.grasps import ParallelGrasp
from dualgrasp.primitives import Primitive
from dualgrasp.refine_parallel import (
    GeometricFallbackHead,
    LearnedGraspHead,
    NoSupport,
    RefineParallelConfig,
    ViewGrid,
    candidate_qualities,
    cylinder_group,
    fallback_refine_batch,
    make_oracle_view_scorer,
    predict_grasp,
    select_view,
)
from dualgrasp.scenes import friction_to_graspness

from test_scenes import bare_scene


CFG = RefineParallelConfig()


def test_view_grid_upper_hemisphere():
    grid = ViewGrid.build(300)
    assert len(grid) == 300
    assert np.all(grid.views[:, 2] > 0)
    assert np.allclose(np.linalg.norm(grid.views, axis=1), 1.0)
    assert len(np.unique(np.round(grid.views, 9), axis=0)) == 300


def test_select_view_uniform_ties_to_first():
    grid = ViewGrid.build(16)
    got = select_view(None, grid, lambda f: np.ones(16))
    assert np.allclose(got, -grid.views[0])


def test_select_view_one_hot():
    grid = ViewGrid.build(16)
    scores = np.zeros(16)
    scores[7] = 1.0
    assert np.allclose(select_view(None, grid, lambda f: scores), -grid.views[7])


def test_select_view_oracle_box_top():
    box = Primitive("box", (0.05, 0.05, 0.04), translation=(0, 0, 0.02))
    scene = bare_scene(box)
    grid = ViewGrid.build(300)
    seed_point = np.array([0.0, 0.0, 0.04])  # center of the top face
    scorer = make_oracle_view_scorer(scene, seed_point, grid, CFG)
    approach = select_view(None, grid, scorer)
    inward = np.array([0.0, 0.0, -1.0])
    ang = np.degrees(np.arccos(np.clip(approach @ inward, -1, 1)))
    assert ang < 15.0


def test_cylinder_group_membership_bounds():
    pts = np.array(
        [
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 0.019],   # inside: |proj| < 0.02
            [0.0, 0.0, 0.021],   # outside: beyond half height
            [0.051, 0.0, 0.0],   # outside: perpendicular 0.051 > 0.05
            [0.049, 0.0, 0.01],  # inside
        ]
    )
    cloud = PointCloud(pts)
    group = cylinder_group(cloud, 0, (0, 0, 1), radius=0.05, height=0.04)
    assert list(group.member_indices) == [0, 1, 4]


def test_cylinder_group_matches_bruteforce(rng):
    cloud = PointCloud(rng.uniform(-0.1, 0.1, size=(400, 3)))
    view = rng.normal(size=3)
    view /= np.linalg.norm(view)
    group = cylinder_group(cloud, 17, view, 0.05, 0.04)
    seed = cloud.points[17]
    expected = []
    for i, p in enumerate(cloud.points):
        rel = p - seed
        proj = rel @ view
        perp = np.linalg.norm(rel - proj * view)
        if abs(proj) <= 0.02 and perp <= 0.05:
            expected.append(i)
    assert list(group.member_indices) == expected


def test_cylinder_group_rotation_equivariance(rng):
    pts = rng.uniform(-0.1, 0.1, size=(200, 3))
    view = np.array([0.0, 0.0, 1.0])
    g0 = cylinder_group(PointCloud(pts), 3, view, 0.05, 0.04)
    rot = Rotation.from_euler("xyz", [0.3, -1.0, 0.5]).as_matrix()
    g1 = cylinder_group(PointCloud(pts @ rot.T), 3, rot @ view, 0.05, 0.04)
    assert np.array_equal(g0.member_indices, g1.member_indices)


def sphere_cloud_and_scene(radius=0.02, center=(0.0, 0.0, 0.1)):
    sphere = Primitive("sphere", (radius,), translation=center)
    rng = np.random.default_rng(0)
    pts, _, _ = sphere.sample_surface(400, rng)
    return PointCloud(pts, viewpoint=(0, 0, 1)), bare_scene(sphere), sphere


def test_fallback_head_on_isolated_sphere():
    cloud, scene, sphere = sphere_cloud_and_scene()
    top_idx = int(np.argmax(cloud.points[:, 2]))
    grid = ViewGrid.build(CFG.n_views)
    scorer = make_oracle_view_scorer(scene, cloud.points[top_idx], grid, CFG)
    view = select_view(None, grid, scorer)
    group = cylinder_group(cloud, top_idx, view, CFG.cylinder_radius, CFG.cylinder_height)
    grasp = predict_grasp(cloud, group, GeometricFallbackHead(scene, CFG))
    # width ~ sphere diameter + margin, with slack for the discrete view grid
    assert 0.04 <= grasp.width <= 0.04 * 1.1 + CFG.width_margin
    from dualgrasp.scenes import oracle_parallel_quality

    assert oracle_parallel_quality(scene, grasp) < 0.12


def test_fallback_is_argmax_over_bins():
    # independent enumeration of every (angle, depth) candidate at a fixed view
    cloud, scene, sphere = sphere_cloud_and_scene(radius=0.025)
    seed_idx = int(np.argmax(cloud.points[:, 2]))
    view = np.array([0.0, 0.0, -1.0])
    group = cylinder_group(cloud, seed_idx, view, CFG.cylinder_radius, CFG.cylinder_height)

    class FixedViewHead(GeometricFallbackHead):
        pass

    grasp = predict_grasp(cloud, group, FixedViewHead(scene, CFG))

    from dualgrasp.scenes import oracle_parallel_quality, NoContact

    best = np.inf
    seed_point = cloud.points[seed_idx]
    for a in CFG.angle_values():
        for d in CFG.depth_bins:
            probe = ParallelGrasp(center=seed_point, approach=view, angle_deg=a,
                                  width=CFG.max_width, depth=d)
            try:
                mu = oracle_parallel_quality(scene, probe)
            except NoContact:
                continue
            best = min(best, mu)
    achieved = oracle_parallel_quality(
        scene,
        ParallelGrasp(center=seed_point, approach=view, angle_deg=grasp.angle_deg,
                      width=CFG.max_width, depth=grasp.depth),
    )
    assert achieved == pytest.approx(best, abs=1e-12)
    assert grasp.score == pytest.approx(friction_to_graspness(best))


def test_decoded_angle_on_bin_lattice():
    cloud, scene, _ = sphere_cloud_and_scene()
    grasps, _ = fallback_refine_batch(cloud, scene, np.arange(0, 50, 7), CFG)
    lattice = set(np.round(CFG.angle_values(), 9))
    for g in grasps:
        assert round(g.angle_deg, 9) in lattice
        assert g.depth in CFG.depth_bins
        assert 0 < g.width <= CFG.max_width


def test_learned_head_bin_decoding():
    angle_logits = np.zeros(12)
    angle_logits[3] = 5.0
    depth_logits = np.array([0.0, 0.0, 3.0, 0.0])
    score_logits = np.zeros(10)
    score_logits[9] = 2.0
    head = LearnedGraspHead(
        {"angle_logits": angle_logits, "depth_logits": depth_logits,
         "width": np.float64(0.2), "score_logits": score_logits},
        CFG,
    )
    cloud = PointCloud([[0, 0, 0], [0.01, 0, 0]])
    group = cylinder_group(cloud, 0, (0, 0, 1), 0.05, 0.04)
    grasp = predict_grasp(cloud, group, head)
    assert grasp.angle_deg == pytest.approx(45.0)  # bin 3 of 12 -> 3 * 15 deg
    assert grasp.depth == pytest.approx(0.03)
    assert grasp.width == pytest.approx(0.1)  # 0.2 clamped to max width
    assert grasp.score == pytest.approx(0.95)  # top bin center


def test_empty_group_raises_no_support():
    cloud = PointCloud([[0, 0, 0], [1, 1, 1]])
    group = cylinder_group(cloud, 0, (0, 0, 1), 1e-6, 1e-6)
    group.member_indices = np.zeros(0, dtype=int)
    with pytest.raises(NoSupport):
        predict_grasp(cloud, group, None)


def test_batch_refine_matches_head_at_chosen_view():
    cloud, scene, _ = sphere_cloud_and_scene(radius=0.03)
    seeds = np.array([5, 40, 111])
    grasps, dropped = fallback_refine_batch(cloud, scene, seeds, CFG)
    assert dropped == 0
    for g in grasps:
        mu, t0, t1 = candidate_qualities(scene, cloud.points[g.seed_index], g.approach, CFG)
        a_i, d_i = np.unravel_index(np.argmin(mu), mu.shape)
        assert g.angle_deg == pytest.approx(CFG.angle_values()[a_i])
        assert g.depth == pytest.approx(CFG.depth_bins[d_i])
        assert g.score == pytest.approx(friction_to_graspness(mu[a_i, d_i]))
