"""Dual-gripper grasp synthesis, training, and evaluation on synthetic scenes."""

__version__ = "0.1.0"

from .cloud import (
    DegenerateNeighborhood,
    PointCloud,
    SpatialIndex,
    build_index,
    estimate_normal,
    farthest_point_sampling,
    knn,
    radius_query,
)
from .grasps import PARALLEL, VACUUM, ParallelGrasp, VacuumGrasp
from .labels import GraspnessMaps, LabelConfig, build_label_maps, project_map_to_cloud
from .metrics import EvalConfig, ap_mu, ap_overall, precision_at_k
from .pipeline import GraspPipeline
from .primitives import Primitive
from .sampling import SamplingConfig, SeedSet, fuse_scores, select_seeds
from .scenes import (
    GroundTruthGrasp,
    NoContact,
    SceneAnnotation,
    SynthConfig,
    generate_scene,
    oracle_parallel_quality,
    oracle_seal_quality,
    sample_ground_truth_grasps,
)
from .train import TrainConfig, train
