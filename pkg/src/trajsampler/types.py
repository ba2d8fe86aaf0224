"""Domain types: trajectories, per-model predictions and the pooled proposal
mixture.

Trajectories are plain ``(T, 2)`` float64 arrays in meters. Containers hold
read-only copies so instances can be shared freely between threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import AllZeroWeights, EmptyEnsemble, InconsistentHorizon

Trajectory = NDArray[np.float64]

# tolerance above which a model's raw weights count as "not normalized"
NORMALIZATION_FLAG_TOL = 1e-6


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def as_trajectory(points: ArrayLike) -> Trajectory:
    """Validate and copy ``points`` into a read-only ``(T, 2)`` array."""
    arr = np.array(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValueError(f"trajectory must have shape (T, 2) with T >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("trajectory contains non-finite coordinates")
    return _frozen(arr)


@dataclass(frozen=True)
class WeightedProposal:
    weight: float
    trajectory: Trajectory

    def __post_init__(self):
        w = float(self.weight)
        if not np.isfinite(w) or w < 0:
            raise ValueError(f"proposal weight must be finite and >= 0, got {self.weight}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "trajectory", as_trajectory(self.trajectory))


@dataclass(frozen=True, eq=False)
class ModelPrediction:
    """The N weighted proposals emitted by one base model.

    ``weights`` has shape ``(N,)`` and ``trajectories`` shape ``(N, T, 2)``.
    ``renormalized`` is set when :func:`normalize_model_weights` had to
    rescale weights that were off the simplex by more than 1e-6.
    """

    model_id: str
    weights: NDArray[np.float64]
    trajectories: NDArray[np.float64]
    renormalized: bool = False

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        y = np.array(self.trajectories, dtype=np.float64)
        if y.ndim != 3 or y.shape[2] != 2:
            raise ValueError(f"trajectories must have shape (N, T, 2), got {y.shape}")
        if w.shape[0] != y.shape[0] or w.shape[0] < 1:
            raise ValueError("need N >= 1 proposals and one weight per proposal")
        if y.shape[1] < 1:
            raise InconsistentHorizon("trajectories must have T >= 1")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if not np.all(np.isfinite(y)):
            raise ValueError("trajectories contain non-finite coordinates")
        object.__setattr__(self, "model_id", str(self.model_id))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "trajectories", _frozen(y))

    @classmethod
    def from_proposals(cls, model_id: str, proposals: Sequence[WeightedProposal]) -> "ModelPrediction":
        if len(proposals) == 0:
            raise ValueError("a model must emit at least one proposal")
        horizons = {p.trajectory.shape[0] for p in proposals}
        if len(horizons) != 1:
            raise InconsistentHorizon(f"model {model_id!r} mixes horizons {sorted(horizons)}")
        return cls(
            model_id,
            np.array([p.weight for p in proposals]),
            np.stack([p.trajectory for p in proposals]),
        )

    @property
    def horizon(self) -> int:
        return self.trajectories.shape[1]

    @property
    def proposals(self) -> tuple[WeightedProposal, ...]:
        return tuple(WeightedProposal(w, y) for w, y in zip(self.weights, self.trajectories))

    def __len__(self) -> int:
        return self.weights.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ModelPrediction):
            return NotImplemented
        return (
            self.model_id == other.model_id
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.trajectories, other.trajectories)
        )


def normalize_model_weights(prediction: ModelPrediction) -> ModelPrediction:
    """Rescale a model's weights onto the standard simplex.

    Proportions are preserved and the input is left untouched. The result
    carries ``renormalized=True`` when the raw sum was off by more than 1e-6.
    """
    total = float(prediction.weights.sum())
    if total <= 0.0:
        raise AllZeroWeights(f"model {prediction.model_id!r} has all-zero weights")
    off = abs(total - 1.0) > NORMALIZATION_FLAG_TOL
    return ModelPrediction(
        prediction.model_id,
        prediction.weights / total,
        prediction.trajectories,
        renormalized=prediction.renormalized or off,
    )


@dataclass(frozen=True, eq=False)
class ProposalMixture:
    """Pooled categorical distribution over all M*N proposals.

    ``points`` stacks every proposal trajectory, ``(P, T, 2)`` with P the
    total proposal count; ``weights`` are the effective weights w/M and sum
    to one. ``model_index``/``proposal_index`` map rows back to the input.
    """

    models: tuple[ModelPrediction, ...]
    points: NDArray[np.float64] = field(repr=False)
    weights: NDArray[np.float64] = field(repr=False)
    model_index: NDArray[np.int64] = field(repr=False)
    proposal_index: NDArray[np.int64] = field(repr=False)

    @property
    def horizon(self) -> int:
        return self.points.shape[1]

    @property
    def num_models(self) -> int:
        return len(self.models)

    @property
    def num_proposals(self) -> int:
        return self.points.shape[0]

    @property
    def renormalized(self) -> bool:
        return any(m.renormalized for m in self.models)

    def __eq__(self, other):
        if not isinstance(other, ProposalMixture):
            return NotImplemented
        return self.models == other.models


def build_mixture(models: Iterable[ModelPrediction]) -> ProposalMixture:
    """Pool the predictions of M models into one mixture with weights w/M.

    Each model is normalized onto its simplex first; zero-weight proposals
    are kept so row indices match the input.
    """
    models = tuple(normalize_model_weights(m) for m in models)
    if not models:
        raise EmptyEnsemble()
    horizons = {m.horizon for m in models}
    if len(horizons) != 1:
        raise InconsistentHorizon(f"models disagree on horizon: {sorted(horizons)}")
    M = len(models)
    points = np.concatenate([m.trajectories for m in models], axis=0)
    weights = np.concatenate([m.weights for m in models]) / M
    model_index = np.concatenate([np.full(len(m), i, dtype=np.int64) for i, m in enumerate(models)])
    proposal_index = np.concatenate([np.arange(len(m), dtype=np.int64) for m in models])
    return ProposalMixture(
        models,
        _frozen(points),
        _frozen(weights),
        _frozen(model_index),
        _frozen(proposal_index),
    )


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """S trajectories in rank order (most preferred first).

    ``source_indices`` holds the mixture rows the candidates were copied
    from when a sampler selects a subset; it is None for continuous output.
    """

    trajectories: NDArray[np.float64]
    source_indices: Optional[NDArray[np.int64]] = None

    def __post_init__(self):
        y = np.array(self.trajectories, dtype=np.float64)
        if y.ndim != 3 or y.shape[2] != 2 or y.shape[0] < 1:
            raise ValueError(f"candidate set must have shape (S, T, 2) with S >= 1, got {y.shape}")
        object.__setattr__(self, "trajectories", _frozen(y))
        if self.source_indices is not None:
            idx = np.array(self.source_indices, dtype=np.int64).reshape(-1)
            if idx.shape[0] != y.shape[0]:
                raise ValueError("source_indices length must equal S")
            object.__setattr__(self, "source_indices", _frozen(idx))

    @classmethod
    def from_indices(cls, mixture: ProposalMixture, indices) -> "CandidateSet":
        idx = np.asarray(indices, dtype=np.int64)
        return cls(mixture.points[idx], idx)

    @property
    def size(self) -> int:
        return self.trajectories.shape[0]

    @property
    def horizon(self) -> int:
        return self.trajectories.shape[1]

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other):
        if not isinstance(other, CandidateSet):
            return NotImplemented
        same_idx = (self.source_indices is None and other.source_indices is None) or (
            self.source_indices is not None
            and other.source_indices is not None
            and np.array_equal(self.source_indices, other.source_indices)
        )
        return same_idx and np.array_equal(self.trajectories, other.trajectories)


@dataclass(frozen=True, eq=False)
class Scenario:
    scenario_id: str
    mixture: ProposalMixture
    ground_truth: Optional[Trajectory] = None

    def __post_init__(self):
        if self.ground_truth is not None:
            gt = as_trajectory(self.ground_truth)
            if gt.shape[0] != self.mixture.horizon:
                raise InconsistentHorizon(
                    f"ground truth has T={gt.shape[0]}, mixture has T={self.mixture.horizon}"
                )
            object.__setattr__(self, "ground_truth", gt)

    @property
    def horizon(self) -> int:
        return self.mixture.horizon

    @property
    def renormalized(self) -> bool:
        return self.mixture.renormalized

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        if self.scenario_id != other.scenario_id or self.mixture != other.mixture:
            return False
        if self.ground_truth is None or other.ground_truth is None:
            return self.ground_truth is None and other.ground_truth is None
        return np.array_equal(self.ground_truth, other.ground_truth)
