"""Model-based risk minimization over the proposal mixture.

The risk of a candidate set is the mixture expectation of minADE_k (or
minFDE_k), with every proposal acting as the reference trajectory::

    risk = sum_p  w_p * min_{s < k} dist(y_p, c_s)

It is piecewise smooth in the candidates, so :func:`risk_subgradient`
routes each proposal's contribution to its single argmin candidate and
:func:`optimize` runs a fixed number of Adam steps on it.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels
from .errors import HorizonMismatch, KExceedsSetSize
from .types import CandidateSet, ProposalMixture


class LossKind(str, enum.Enum):
    MIN_ADE = "minade"
    MIN_FDE = "minfde"


class Schedule(str, enum.Enum):
    CONSTANT = "constant"
    ANNEAL = "anneal"


class InitKind(str, enum.Enum):
    CATEGORICAL = "categorical"
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class LossSpec:
    kind: LossKind = LossKind.MIN_ADE
    k: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if int(self.k) < 1:
            raise ValueError(f"loss k must be >= 1, got {self.k}")
        object.__setattr__(self, "k", int(self.k))

    @property
    def final_only(self) -> bool:
        return self.kind is LossKind.MIN_FDE


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.1
    steps: int = 256
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    init: InitKind = InitKind.CATEGORICAL
    jitter_sigma: float = 0.01
    seed: int = 0
    keep_best_iterate: bool = True
    # independent initializations; the lowest-risk run wins
    restarts: int = 1
    # "anneal" holds learning_rate for the first anneal_hold fraction of the
    # steps, then decays it geometrically to learning_rate * anneal_floor,
    # zeroing the Adam moments anneal_restarts times along the way
    schedule: Schedule = Schedule.ANNEAL
    anneal_hold: float = 0.3
    anneal_floor: float = 1e-6
    anneal_restarts: int = 6
    # relative-improvement early stop; 0 disables it (the default)
    stop_tol: float = 0.0
    stop_window: int = 32

    def __post_init__(self):
        object.__setattr__(self, "init", InitKind(self.init))
        object.__setattr__(self, "schedule", Schedule(self.schedule))
        if not (0 <= self.anneal_hold <= 1 and 0 < self.anneal_floor <= 1 and self.anneal_restarts >= 0):
            raise ValueError("need 0 <= anneal_hold <= 1, 0 < anneal_floor <= 1, anneal_restarts >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("adam betas must lie in [0, 1)")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        if self.stop_tol < 0 or self.stop_window < 1:
            raise ValueError("stop_tol must be >= 0 and stop_window >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")

    @classmethod
    def thorough(cls, **overrides) -> "OptimizerConfig":
        """Longer, multi-start budget used by the oracle checks."""
        params = dict(steps=4096, restarts=8)
        params.update(overrides)
        return cls(**params)

    def restart_seed(self, j: int) -> int:
        if j == 0:
            return self.seed
        return int(np.random.SeedSequence([self.seed, j]).generate_state(1, np.uint64)[0])


def learning_rates(config: OptimizerConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-step learning rates and moment-reset flags for ``config``."""
    n = config.steps
    lrs = np.full(n, float(config.learning_rate))
    resets = np.zeros(n, dtype=bool)
    if config.schedule is Schedule.CONSTANT or n == 0:
        return lrs, resets
    hold = int(config.anneal_hold * n)
    span = max(n - 1 - hold, 1)
    frac = np.clip((np.arange(n) - hold) / span, 0.0, 1.0)
    lrs = config.learning_rate * config.anneal_floor ** frac
    for j in range(config.anneal_restarts):
        i = hold + (j * (n - hold)) // config.anneal_restarts
        if i < n:
            resets[i] = True
    return lrs, resets


@dataclass(frozen=True)
class OptimizationTrace:
    """Risk after each Adam step (index 0 is the initialization)."""

    risks: np.ndarray = field(repr=False)
    final_risk: float
    best_risk: float
    best_step: int
    restart: int = 0

    @property
    def initial_risk(self) -> float:
        return float(self.risks[0])


def _check(mixture: ProposalMixture, cands: np.ndarray, loss: LossSpec):
    if cands.ndim != 3 or cands.shape[1:] != mixture.points.shape[1:]:
        raise HorizonMismatch(
            f"candidates of shape {cands.shape} do not match horizon T={mixture.horizon}"
        )
    if loss.k > cands.shape[0]:
        raise KExceedsSetSize(f"loss k={loss.k} exceeds candidate set size S={cands.shape[0]}")


def _as_array(candidates) -> np.ndarray:
    if isinstance(candidates, CandidateSet):
        return candidates.trajectories
    return np.asarray(candidates, dtype=np.float64)


def risk(mixture: ProposalMixture, candidates, loss: LossSpec) -> float:
    """Expected min-over-prefix displacement error under the mixture."""
    cands = _as_array(candidates)
    _check(mixture, cands, loss)
    d = kernels.distance_matrix(mixture.points, cands[: loss.k], loss.final_only)
    return float(np.dot(mixture.weights, d.min(axis=1)))


def risk_subgradient(mixture: ProposalMixture, candidates, loss: LossSpec) -> np.ndarray:
    """Subgradient of :func:`risk` w.r.t. the candidate coordinates, (S, T, 2).

    Candidates beyond the k-prefix get zero rows.
    """
    cands = _as_array(candidates)
    _check(mixture, cands, loss)
    _, g = kernels.risk_and_grad(mixture.points, mixture.weights, cands, loss.k, loss.final_only)
    return g


@dataclass(frozen=True)
class AdamState:
    params: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def fresh(cls, params) -> "AdamState":
        p = np.array(params, dtype=np.float64)
        return cls(p, np.zeros_like(p), np.zeros_like(p), 0)


def adam_update(state: AdamState, gradient, config: OptimizerConfig) -> AdamState:
    """One bias-corrected Adam step; returns a new state."""
    g = np.asarray(gradient, dtype=np.float64)
    if g.shape != state.params.shape:
        raise ValueError(f"gradient shape {g.shape} != parameter shape {state.params.shape}")
    t = state.t + 1
    x, m, v = kernels._adam_step_np(
        state.params, state.m, state.v, g, t,
        config.learning_rate, config.beta1, config.beta2, config.eps,
    )
    return AdamState(x, m, v, t)


def _weighted_order(rng: np.random.Generator, weights: np.ndarray) -> np.ndarray:
    # Efraimidis-Spirakis keys: sorting by u**(1/w) descending is a weighted
    # draw without replacement; zero weights sort last in random order.
    u = rng.random(weights.shape[0])
    with np.errstate(divide="ignore"):
        keys = np.where(weights > 0, np.log(u) / np.where(weights > 0, weights, 1.0), -np.inf)
    tiebreak = rng.random(weights.shape[0])
    return np.lexsort((tiebreak, -keys))


def random_init(mixture: ProposalMixture, S: int, config: OptimizerConfig) -> CandidateSet:
    """Starting candidates for :func:`optimize`, deterministic given the seed.

    ``categorical`` draws S proposals by effective weight (without
    replacement while S <= P) and adds Gaussian jitter; ``uniform`` ignores
    the weights; ``gaussian`` scatters points around the weighted centroid
    with the mixture's own per-coordinate spread.
    """
    if S < 1:
        raise ValueError("S must be >= 1")
    rng = np.random.default_rng(config.seed)
    P = mixture.num_proposals
    w = mixture.weights
    if config.init is InitKind.GAUSSIAN:
        centroid = np.tensordot(w, mixture.points, axes=1)
        spread = np.sqrt(np.tensordot(w, (mixture.points - centroid) ** 2, axes=1))
        base = centroid + spread * rng.standard_normal((S,) + centroid.shape)
        return CandidateSet(base)
    if config.init is InitKind.CATEGORICAL:
        order = _weighted_order(rng, w)
        probs = w
    else:
        order = rng.permutation(P)
        probs = np.full(P, 1.0 / P)
    idx = order[: min(S, P)]
    if S > P:
        idx = np.concatenate([idx, rng.choice(P, size=S - P, replace=True, p=probs)])
    base = mixture.points[idx]
    if config.jitter_sigma > 0:
        base = base + rng.normal(0.0, config.jitter_sigma, size=base.shape)
    return CandidateSet(base)


def rank_by_contribution(mixture: ProposalMixture, cands: np.ndarray, loss: LossSpec) -> np.ndarray:
    """Order candidate indices by how much the risk rises when each is dropped.

    Candidates inside the k-prefix come first, largest increase first (ties
    by index); candidates outside the prefix keep their order at the end.
    """
    k = loss.k
    S = cands.shape[0]
    if k == 1:
        return np.arange(S)
    d = kernels.distance_matrix(mixture.points, cands[:k], loss.final_only)
    full = mixture.weights @ d.min(axis=1)
    increase = np.empty(k)
    for s in range(k):
        rest = np.delete(d, s, axis=1)
        increase[s] = mixture.weights @ rest.min(axis=1) - full
    prefix = np.lexsort((np.arange(k), -increase))
    return np.concatenate([prefix, np.arange(k, S)])


def optimize(
    mixture: ProposalMixture,
    S: int,
    loss: Optional[LossSpec] = None,
    config: Optional[OptimizerConfig] = None,
    init: Optional[CandidateSet] = None,
) -> tuple[CandidateSet, OptimizationTrace]:
    """Minimize :func:`risk` over S free candidate trajectories with Adam.

    Runs exactly ``config.steps`` steps (unless the optional early stop is
    enabled) under the configured learning-rate schedule, keeps the
    lowest-risk iterate when ``keep_best_iterate`` and ranks the output by
    drop-one risk increase. With ``restarts > 1`` the whole descent is
    repeated from fresh random starts and the lowest-risk run is returned;
    an explicit ``init`` is used for the first run only.
    """
    loss = loss or LossSpec(LossKind.MIN_ADE, S)
    config = config or OptimizerConfig()
    lrs, resets = learning_rates(config)
    chosen = None
    for j in range(config.restarts):
        if j == 0 and init is not None:
            start = init
        else:
            start = random_init(mixture, S, replace(config, seed=config.restart_seed(j)))
        x0 = start.trajectories
        if x0.shape[0] != S:
            raise ValueError(f"init has {x0.shape[0]} candidates, expected S={S}")
        _check(mixture, x0, loss)
        best, last, risks, best_step = kernels.adam_descent(
            mixture.points, mixture.weights, x0, loss.k, loss.final_only,
            lrs, resets, config.beta1, config.beta2, config.eps,
            config.stop_tol, config.stop_window,
        )
        out = best if config.keep_best_iterate else last
        score = risks[best_step] if config.keep_best_iterate else risks[-1]
        if chosen is None or score < chosen[0]:
            chosen = (score, j, out, risks, best_step)
    _, j, out, risks, best_step = chosen
    order = rank_by_contribution(mixture, out, loss)
    trace = OptimizationTrace(
        risks=risks,
        final_risk=float(risks[-1]),
        best_risk=float(risks[best_step]),
        best_step=int(best_step),
        restart=j,
    )
    return CandidateSet(out[order]), trace
