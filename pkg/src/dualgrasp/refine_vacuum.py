"""Vacuum pose refinement: covariance normals complete the poses from geometry alone.

No trained parameters are involved; this stage only runs at inference time.
"""

from .cloud import DegenerateNeighborhood, PointCloud, SpatialIndex, estimate_normal
from .grasps import VacuumGrasp
from .sampling import SeedSet

DEFAULT_NORMAL_RADIUS = 0.01


def refine_vacuum_poses(cloud: PointCloud, seeds: SeedSet, r: float = DEFAULT_NORMAL_RADIUS,
                        index: SpatialIndex = None):
    """One vacuum pose per seed: center at the seed, covariance normal, fused score.

    Seeds with degenerate neighborhoods are dropped rather than raised.
    Returns (grasps, dropped_count).
    """
    if seeds.gripper != "vacuum":
        raise ValueError(f"expected vacuum seeds, got {seeds.gripper!r}")
    idx = index or SpatialIndex(cloud)
    grasps = []
    dropped = 0
    for seed, score in zip(seeds.indices, seeds.fused_scores):
        try:
            n = estimate_normal(idx, int(seed), r)
        except DegenerateNeighborhood:
            dropped += 1
            continue
        grasps.append(
            VacuumGrasp(center=cloud.points[seed], normal=n, score=float(score), seed_index=int(seed))
        )
    return grasps, dropped


def rank_vacuum(grasps, k: int):
    """Top-k vacuum grasps by descending score, ties by ascending seed index."""
    order = sorted(range(len(grasps)), key=lambda i: (-grasps[i].score, grasps[i].seed_index))
    return [grasps[i] for i in order[: max(0, k)]]
