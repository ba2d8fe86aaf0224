"""Independent verification oracles for the risk optimizer.

None of these share code with the optimized path: the brute-force subset
search and the finite differences evaluate the risk directly with numpy,
and the geometric median uses Weiszfeld's fixed-point iteration.
"""
from __future__ import annotations

import itertools
from math import comb

import numpy as np

from .errors import KExceedsSetSize, TooManyProposals
from .types import ProposalMixture

MAX_ORACLE_PROPOSALS = 16


def direct_risk(points, weights, cands, k, final_only=False) -> float:
    """Plain-numpy risk evaluation, independent of :mod:`trajsampler.kernels`."""
    points = np.asarray(points, dtype=np.float64)
    cands = np.asarray(cands, dtype=np.float64)[:k]
    total = 0.0
    for w, y in zip(weights, points):
        if final_only:
            dists = np.linalg.norm(cands[:, -1, :] - y[-1], axis=-1)
        else:
            dists = np.linalg.norm(cands - y, axis=-1).mean(axis=-1)
        total += w * dists.min()
    return float(total)


def brute_force_subset_oracle(mixture: ProposalMixture, S: int, loss):
    """Exhaustively score every size-S subset of the proposals.

    Returns ``(best_indices, best_risk)``; only feasible for small P.
    """
    P = mixture.num_proposals
    if P > MAX_ORACLE_PROPOSALS:
        raise TooManyProposals(f"{P} proposals exceed the oracle limit of {MAX_ORACLE_PROPOSALS}")
    if S > P:
        raise KExceedsSetSize(f"S={S} exceeds the {P} available proposals")
    if loss.k > S:
        raise KExceedsSetSize(f"loss k={loss.k} exceeds S={S}")
    # only the k-prefix enters the risk, so enumerating k-subsets suffices;
    # the winner is padded to S with the lowest unused indices
    best_idx, best = None, np.inf
    for subset in itertools.combinations(range(P), loss.k):
        r = direct_risk(mixture.points, mixture.weights, mixture.points[list(subset)],
                        loss.k, loss.final_only)
        if r < best:
            best, best_idx = r, list(subset)
    rest = [i for i in range(P) if i not in best_idx]
    return np.array(best_idx + rest[: S - loss.k]), float(best)


def subset_count(P: int, S: int) -> int:
    return comb(P, S)


def weiszfeld(points, weights, tol=1e-9, max_iter=10_000):
    """Weighted geometric median of 2-D points by Weiszfeld iteration.

    When an iterate lands on a data point it is nudged by 1e-9 so the
    update stays defined.
    """
    pts = np.asarray(points, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    keep = w > 0
    pts, w = pts[keep], w[keep]
    if len(pts) == 1:
        return pts[0].copy()
    x = (w[:, None] * pts).sum(axis=0) / w.sum()
    for _ in range(max_iter):
        d = np.linalg.norm(pts - x, axis=1)
        if np.any(d < 1e-12):
            # check whether the data point itself is optimal before nudging
            j = int(np.argmin(d))
            others = np.arange(len(pts)) != j
            pull = (w[others, None] * (pts[others] - x) / d[others, None]).sum(axis=0)
            if np.linalg.norm(pull) <= w[j]:
                return pts[j].copy()
            x = x + 1e-9
            d = np.linalg.norm(pts - x, axis=1)
        inv = w / d
        x_new = (inv[:, None] * pts).sum(axis=0) / inv.sum()
        if np.linalg.norm(x_new - x) < tol:
            return x_new
        x = x_new
    return x


def median_objective(points, weights, x) -> float:
    return float(np.sum(weights * np.linalg.norm(np.asarray(points) - x, axis=-1)))


def geometric_median_oracle(mixture: ProposalMixture) -> np.ndarray:
    """Per-timestep weighted geometric median of all proposals, ``(T, 2)``.

    With k = S = 1 the risk decouples over timesteps into independent
    weighted Fermat-Weber problems, so this is the exact minimizer.
    """
    T = mixture.horizon
    out = np.empty((T, 2))
    for t in range(T):
        out[t] = weiszfeld(mixture.points[:, t, :], mixture.weights)
    return out


def finite_difference_gradient(mixture: ProposalMixture, candidates, loss, h=1e-5) -> np.ndarray:
    """Central differences of the risk, one coordinate at a time."""
    if h <= 0:
        raise ValueError("h must be > 0")
    c = np.array(getattr(candidates, "trajectories", candidates), dtype=np.float64)
    grad = np.zeros_like(c)
    flat = c.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = direct_risk(mixture.points, mixture.weights, c, loss.k, loss.final_only)
        flat[i] = orig - h
        down = direct_risk(mixture.points, mixture.weights, c, loss.k, loss.final_only)
        flat[i] = orig
        g[i] = (up - down) / (2 * h)
    return grad
