"""Baseline samplers that pick a subset of the pooled proposals.

Every sampler here returns distinct mixture rows, so each output trajectory
is pointwise equal to some input proposal.

Cost notes: Lloyd iterations are O(P k T) per iteration with a bounded
iteration count. NMS needs one ADE row per selection, so it is O(P T) when
everything collapses onto the first pick and O(P^2 T) when every proposal is
isolated and only one is discarded per step.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import KExceedsPositiveSupport, KExceedsProposals
from .types import CandidateSet, ProposalMixture


def _check_k(mixture: ProposalMixture, k: int):
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > mixture.num_proposals:
        raise KExceedsProposals(f"k={k} exceeds the {mixture.num_proposals} proposals")


def sample_uniform(mixture: ProposalMixture, k: int, seed: int = 0) -> CandidateSet:
    """k distinct proposals drawn uniformly without replacement."""
    _check_k(mixture, k)
    rng = np.random.default_rng(seed)
    return CandidateSet.from_indices(mixture, rng.choice(mixture.num_proposals, size=k, replace=False))


def sample_categorical(mixture: ProposalMixture, k: int, seed: int = 0) -> CandidateSet:
    """k distinct proposals by successive draws from the effective weights,
    renormalizing over the remaining proposals after each draw."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    support = int(np.count_nonzero(mixture.weights > 0))
    if k > support:
        raise KExceedsPositiveSupport(f"k={k} exceeds the {support} proposals with positive weight")
    rng = np.random.default_rng(seed)
    w = mixture.weights.copy()
    picked = []
    for _ in range(k):
        i = int(rng.choice(w.shape[0], p=w / w.sum()))
        picked.append(i)
        w[i] = 0.0
    return CandidateSet.from_indices(mixture, picked)


def weight_order(mixture: ProposalMixture) -> np.ndarray:
    """Rows by descending effective weight, ties by (model, proposal) index."""
    return np.argsort(-mixture.weights, kind="stable")


def sample_topk(mixture: ProposalMixture, k: int) -> CandidateSet:
    """The k highest-weight proposals, most likely first."""
    _check_k(mixture, k)
    return CandidateSet.from_indices(mixture, weight_order(mixture)[:k])


@dataclass(frozen=True)
class NmsConfig:
    threshold: float = 1.0  # meters of ADE
    metric: str = "ade"

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("NMS threshold must be > 0")
        if self.metric != "ade":
            raise ValueError(f"unsupported NMS metric {self.metric!r}")


def nms_indices(mixture: ProposalMixture, k: int, config: Optional[NmsConfig] = None) -> np.ndarray:
    config = config or NmsConfig()
    _check_k(mixture, k)
    pool = list(weight_order(mixture))
    selected: list[int] = []
    suppressed: list[int] = []
    points = mixture.points
    while pool and len(selected) < k:
        top = pool.pop(0)
        selected.append(top)
        if not pool:
            break
        d = kernels.distance_matrix(points[pool], points[top][None])[:, 0]
        keep = d >= config.threshold
        suppressed.extend(i for i, kp in zip(pool, keep) if not kp)
        pool = [i for i, kp in zip(pool, keep) if kp]
    if len(selected) < k:
        # pool exhausted: re-admit suppressed proposals by descending weight
        rank = np.empty(mixture.num_proposals, dtype=np.int64)
        rank[weight_order(mixture)] = np.arange(mixture.num_proposals)
        suppressed.sort(key=lambda i: rank[i])
        selected.extend(suppressed[: k - len(selected)])
    return np.array(selected, dtype=np.int64)


def nms_select(mixture: ProposalMixture, k: int, config: Optional[NmsConfig] = None) -> CandidateSet:
    """Greedy non-maximum suppression on ADE.

    Repeatedly takes the most likely remaining proposal and discards every
    remaining proposal within ``threshold`` ADE of it. If the pool runs dry
    before k picks, suppressed proposals are re-admitted by weight.
    """
    return CandidateSet.from_indices(mixture, nms_indices(mixture, k, config))


class KMeansInit(str, enum.Enum):
    PLUS_PLUS = "plusplus"
    FROM_NMS = "nms"


@dataclass(frozen=True)
class KMeansConfig:
    k: int = 10
    max_iters: int = 100
    init: KMeansInit = KMeansInit.PLUS_PLUS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "init", KMeansInit(self.init))
        if self.k < 1:
            raise ValueError("KMeans needs k >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def kmeans_plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding; returns row indices into ``X``."""
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(free))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((X - X[nxt]) ** 2, axis=1))
    return np.array(chosen, dtype=np.int64)


def assign_distinct(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Map each centroid to its own proposal, closest pairs first."""
    K = centroids.shape[0]
    d = np.sqrt(np.sum((centroids[:, None, :] - X[None, :, :]) ** 2, axis=-1))
    order = np.lexsort((np.tile(np.arange(X.shape[0]), K), np.repeat(np.arange(K), X.shape[0]), d.ravel()))
    out = np.full(K, -1, dtype=np.int64)
    taken = np.zeros(X.shape[0], dtype=bool)
    left = K
    for flat in order:
        c, p = divmod(int(flat), X.shape[0])
        if out[c] < 0 and not taken[p]:
            out[c] = p
            taken[p] = True
            left -= 1
            if left == 0:
                break
    return out


def _refine(mixture: ProposalMixture, seeds: np.ndarray, max_iters: int):
    X = mixture.points.reshape(mixture.num_proposals, -1)
    centroids, labels, _ = kernels.lloyd(X, X[seeds], max_iters)
    return assign_distinct(X, centroids), labels


def kmeans_select(mixture: ProposalMixture, config: Optional[KMeansConfig] = None,
                  nms_config: Optional[NmsConfig] = None) -> CandidateSet:
    """Cluster the proposals into k groups and return the proposal nearest to
    each centre.

    Clustering runs on unweighted trajectories flattened to 2T-vectors. With
    k-means++ seeding the output is ordered by the effective weight mass of
    each cluster; with NMS seeding each cluster keeps the rank of its seed.
    """
    config = config or KMeansConfig()
    _check_k(mixture, config.k)
    if config.init is KMeansInit.FROM_NMS:
        seeds = nms_indices(mixture, config.k, nms_config)
        picks, _ = _refine(mixture, seeds, config.max_iters)
        return CandidateSet.from_indices(mixture, picks)
    rng = np.random.default_rng(config.seed)
    X = mixture.points.reshape(mixture.num_proposals, -1)
    seeds = kmeans_plus_plus(X, config.k, rng)
    picks, labels = _refine(mixture, seeds, config.max_iters)
    mass = np.bincount(labels, weights=mixture.weights, minlength=config.k)
    order = np.lexsort((np.arange(config.k), -mass))
    return CandidateSet.from_indices(mixture, picks[order])


def nms_kmeans_select(mixture: ProposalMixture, k: int, nms_config: Optional[NmsConfig] = None,
                      kmeans_config: Optional[KMeansConfig] = None) -> CandidateSet:
    """KMeans whose initial centres are the NMS picks."""
    base = kmeans_config or KMeansConfig(k=k)
    cfg = KMeansConfig(k=k, max_iters=base.max_iters, init=KMeansInit.FROM_NMS, seed=base.seed)
    return kmeans_select(mixture, cfg, nms_config)


def kmeans_from_indices(mixture: ProposalMixture, seeds, max_iters: int = 100) -> CandidateSet:
    """Lloyd refinement started from the given proposal rows, keeping their order."""
    picks, _ = _refine(mixture, np.asarray(seeds, dtype=np.int64), max_iters)
    return CandidateSet.from_indices(mixture, picks)
