"""Precision@k and average-precision metrics over coefficient grids.

A parallel grasp counts positive at threshold mu when its oracle required
friction is <= mu (a larger mu admits more grasps); a vacuum grasp counts
positive at mu when its oracle seal coefficient is >= mu (a larger mu is
stricter). Precision@k is computed over min(k, len) so short high-precision
lists are not penalized; this differs from zero-filling conventions used by
some benchmarks, so compare AP numbers across tools with care (see README).
"""

from dataclasses import dataclass

import numpy as np

from .grasps import PARALLEL, VACUUM
from .scenes import NoContact, SceneAnnotation, oracle_parallel_quality, oracle_seal_quality


@dataclass
class EvalConfig:
    k_max: int = 50
    mu_parallel_grid: tuple = (0.2, 0.4, 0.6, 0.8, 1.0)
    mu_vacuum_grid: tuple = (0.2, 0.4, 0.6, 0.8)
    max_consecutive_failures: int = 3
    exec_mu_parallel: float = 0.8
    exec_mu_vacuum: float = 0.4
    cup_radius: float = 0.01

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        for grid in (self.mu_parallel_grid, self.mu_vacuum_grid):
            if list(grid) != sorted(grid):
                raise ValueError(f"mu grid must be ascending: {grid}")

    def mu_grid(self, gripper: str) -> tuple:
        return self.mu_parallel_grid if gripper == PARALLEL else self.mu_vacuum_grid


def grasp_qualities(grasps, scene: SceneAnnotation, gripper: str, config: EvalConfig = None) -> np.ndarray:
    """Oracle quality per grasp: required friction (parallel, inf on miss) or seal."""
    cfg = config or EvalConfig()
    out = np.empty(len(grasps))
    for i, g in enumerate(grasps):
        if gripper == PARALLEL:
            try:
                out[i] = oracle_parallel_quality(scene, g)
            except NoContact:
                out[i] = np.inf
        else:
            out[i] = oracle_seal_quality(scene, g, cfg.cup_radius)
    return out


def successes_at(qualities: np.ndarray, mu: float, gripper: str) -> np.ndarray:
    if gripper == PARALLEL:
        return qualities <= mu
    return qualities >= mu


def precision_at_k(grasps, scene: SceneAnnotation, mu: float, gripper: str, k: int,
                   config: EvalConfig = None, qualities=None) -> float:
    """Fraction of the top-min(k, len) score-ranked grasps the oracle accepts at mu."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(grasps) == 0:
        return 0.0
    if qualities is None:
        qualities = grasp_qualities(grasps, scene, gripper, config)
    top = min(k, len(grasps))
    return float(np.mean(successes_at(np.asarray(qualities)[:top], mu, gripper)))


def ap_mu(grasps, scene: SceneAnnotation, mu: float, gripper: str,
          config: EvalConfig = None, qualities=None) -> float:
    """Average of Precision@k for k = 1..k_max at one coefficient threshold."""
    cfg = config or EvalConfig()
    if len(grasps) == 0:
        return 0.0
    if qualities is None:
        qualities = grasp_qualities(grasps, scene, gripper, cfg)
    succ = successes_at(np.asarray(qualities), mu, gripper).astype(np.float64)
    cum = np.cumsum(succ)
    ks = np.minimum(np.arange(1, cfg.k_max + 1), len(grasps))
    return float(np.mean(cum[ks - 1] / ks))


def ap_overall(grasps, scene: SceneAnnotation, gripper: str,
               config: EvalConfig = None, qualities=None) -> float:
    """Mean of ap_mu over the gripper's coefficient grid."""
    cfg = config or EvalConfig()
    if qualities is None:
        qualities = grasp_qualities(grasps, scene, gripper, cfg)
    return float(np.mean([ap_mu(grasps, scene, mu, gripper, cfg, qualities) for mu in cfg.mu_grid(gripper)]))


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve via the rank statistic; ties get average ranks."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both positive and negative labels")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s))
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
